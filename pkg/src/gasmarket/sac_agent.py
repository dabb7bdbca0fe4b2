"""Soft actor-critic for a one-dimensional bounded continuous action.

The actor outputs the mean and log standard deviation of a Gaussian whose
sample is squashed by tanh onto the closed log-price interval; twin critics
with polyak-averaged target copies score (observation, action) pairs; the
entropy temperature is tuned in log space toward a fixed target entropy.
Everything runs in float64 on the dense kernel from :mod:`.neuralnet`, and
the complete training state (networks, optimizers, replay buffer, counters,
RNG streams) serializes to a versioned document so a resumed run continues
bit-identically.

The loss computations are module-level pure functions taking explicit noise
vectors; the :class:`SacAgent` methods only draw the noise and apply the
optimizer steps, which keeps every gradient reachable by finite-difference
checks.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .docio import decode_array, encode_array, rng_from_doc, rng_to_doc, sha256_of, spawn_rng
from .errors import (
    ConfigurationError,
    DomainError,
    FormatError,
    NumericError,
    ProtocolError,
)
from .market_env import OBS_DIM, MarketParams
from .neuralnet import (
    Gradients,
    NetworkWeights,
    ScalarAdam,
    adam_from_doc,
    adam_init,
    adam_step,
    adam_to_doc,
    backward_from_cache,
    forward,
    forward_cached,
    init_network,
    net_from_doc,
    net_to_doc,
    soft_update,
)

__all__ = [
    "LOG_STD_MIN",
    "LOG_STD_MAX",
    "AgentConfig",
    "Transition",
    "TransitionBatch",
    "ReplayBuffer",
    "SacAgent",
    "sample_action",
    "deterministic_action",
    "actor_distribution",
    "squash_log_prob",
    "compute_critic_targets",
    "critic_loss_and_grads",
    "actor_loss_and_grads",
    "temperature_gradient",
]

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters for the agent; bounds come from the market's price band."""

    action_low: float
    action_high: float
    gamma: float = 0.99
    replay_capacity: int = 1_000_000
    batch_size: int = 256
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    polyak: float = 0.005
    target_entropy: float = -1.0
    warmup_steps: int = 1000
    updates_per_step: int = 1
    hidden: tuple[int, ...] = (256, 256)
    init_alpha: float = 1.0

    def __post_init__(self):
        if not self.action_low < self.action_high:
            raise ConfigurationError(
                f"need action_low < action_high, got ({self.action_low}, {self.action_high})")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        if self.replay_capacity < self.batch_size:
            raise ConfigurationError(
                f"replay_capacity {self.replay_capacity} < batch_size {self.batch_size}")
        if self.warmup_steps < self.batch_size:
            raise ConfigurationError(
                f"warmup_steps {self.warmup_steps} < batch_size {self.batch_size}")
        for name in ("lr_actor", "lr_critic", "lr_alpha"):
            if getattr(self, name) <= 0.0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0.0 <= self.polyak <= 1.0:
            raise ConfigurationError(f"polyak must lie in [0, 1], got {self.polyak}")
        if self.updates_per_step < 1:
            raise ConfigurationError("updates_per_step must be at least 1")
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ConfigurationError(f"hidden sizes must be positive, got {self.hidden}")
        object.__setattr__(self, "hidden", hidden)
        if self.init_alpha <= 0.0:
            raise ConfigurationError("init_alpha must be positive")

    @classmethod
    def for_market(cls, params: MarketParams, **overrides) -> "AgentConfig":
        overrides.setdefault("gamma", params.gamma)
        return cls(action_low=params.action_low, action_high=params.action_high,
                   **overrides)

    @property
    def action_center(self) -> float:
        return (self.action_low + self.action_high) / 2.0

    @property
    def action_halfwidth(self) -> float:
        return (self.action_high - self.action_low) / 2.0


@dataclass(frozen=True)
class Transition:
    """One environment interaction."""

    obs: np.ndarray
    action: float
    reward: float
    next_obs: np.ndarray
    done: bool


@dataclass(frozen=True)
class TransitionBatch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]


class ReplayBuffer:
    """Uniform ring buffer over transitions, fully serializable."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM):
        if capacity < 1:
            raise ConfigurationError("replay capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self._obs = np.zeros((self.capacity, self.obs_dim))
        self._actions = np.zeros(self.capacity)
        self._rewards = np.zeros(self.capacity)
        self._next_obs = np.zeros((self.capacity, self.obs_dim))
        self._dones = np.zeros(self.capacity)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, transition: Transition) -> None:
        obs = np.asarray(transition.obs, dtype=np.float64)
        next_obs = np.asarray(transition.next_obs, dtype=np.float64)
        if obs.shape != (self.obs_dim,) or next_obs.shape != (self.obs_dim,):
            raise DomainError(
                f"observation shape {obs.shape} incompatible with obs_dim {self.obs_dim}")
        if not (np.isfinite(obs).all() and np.isfinite(next_obs).all()
                and math.isfinite(transition.action) and math.isfinite(transition.reward)):
            raise NumericError("transitions must be finite")
        i = self.cursor
        self._obs[i] = obs
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_obs[i] = next_obs
        self._dones[i] = 1.0 if transition.done else 0.0
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform with replacement over filled slots."""
        if self.size < batch_size:
            raise ProtocolError(
                f"cannot sample {batch_size} transitions from a buffer of {self.size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return TransitionBatch(
            obs=self._obs[idx].copy(),
            actions=self._actions[idx].copy(),
            rewards=self._rewards[idx].copy(),
            next_obs=self._next_obs[idx].copy(),
            dones=self._dones[idx].copy(),
        )

    def to_doc(self) -> dict:
        return {
            "capacity": self.capacity,
            "obs_dim": self.obs_dim,
            "size": self.size,
            "cursor": self.cursor,
            "obs": encode_array(self._obs[: self.size]),
            "actions": encode_array(self._actions[: self.size]),
            "rewards": encode_array(self._rewards[: self.size]),
            "next_obs": encode_array(self._next_obs[: self.size]),
            "dones": encode_array(self._dones[: self.size]),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ReplayBuffer":
        buf = cls(doc["capacity"], doc["obs_dim"])
        size = int(doc["size"])
        buf._obs[:size] = decode_array(doc["obs"])
        buf._actions[:size] = decode_array(doc["actions"])
        buf._rewards[:size] = decode_array(doc["rewards"])
        buf._next_obs[:size] = decode_array(doc["next_obs"])
        buf._dones[:size] = decode_array(doc["dones"])
        buf.size = size
        buf.cursor = int(doc["cursor"])
        return buf


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def actor_distribution(actor: NetworkWeights, obs: np.ndarray):
    """Forward the actor and split (mean, clipped log std, raw log std, cache)."""
    out, cache = forward_cached(actor, obs)
    if not np.isfinite(out).all():
        raise NumericError("actor network produced non-finite output")
    mu = out[:, 0]
    raw_log_std = out[:, 1]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    return mu, log_std, raw_log_std, cache


def squash_log_prob(mu: np.ndarray, log_std: np.ndarray, noise: np.ndarray,
                    action_low: float, action_high: float):
    """Reparameterized squashed-Gaussian sample and its exact log density.

    Returns (action, log_prob, z, tanh_z).  The density correction uses the
    numerically stable identity ln(1 - tanh(z)^2) =
    2 (ln 2 - z - softplus(-2z)).
    """
    center = (action_low + action_high) / 2.0
    half = (action_high - action_low) / 2.0
    sigma = np.exp(log_std)
    z = mu + sigma * noise
    tanh_z = np.tanh(z)
    action = np.minimum(np.maximum(center + half * tanh_z, action_low), action_high)
    log_normal = -0.5 * noise ** 2 - log_std - 0.5 * _LOG_2PI
    log_det = math.log(half) + 2.0 * (math.log(2.0) - z - _softplus(-2.0 * z))
    log_prob = log_normal - log_det
    return action, log_prob, z, tanh_z


def sample_action(actor: NetworkWeights, obs: np.ndarray, rng: np.random.Generator,
                  action_low: float, action_high: float) -> tuple[float, float]:
    """Draw one stochastic action for a single observation."""
    obs2d = np.asarray(obs, dtype=np.float64)[None, :]
    mu, log_std, _, _ = actor_distribution(actor, obs2d)
    noise = rng.standard_normal(1)
    action, log_prob, _, _ = squash_log_prob(mu, log_std, noise, action_low, action_high)
    return float(action[0]), float(log_prob[0])


def deterministic_action(actor: NetworkWeights, obs: np.ndarray,
                         action_low: float, action_high: float) -> float:
    """Squashed mean of the policy, used for evaluation."""
    obs2d = np.asarray(obs, dtype=np.float64)[None, :]
    out = forward(actor, obs2d)
    if not np.isfinite(out).all():
        raise NumericError("actor network produced non-finite output")
    center = (action_low + action_high) / 2.0
    half = (action_high - action_low) / 2.0
    return float(center + half * math.tanh(float(out[0, 0])))


def compute_critic_targets(batch: TransitionBatch, actor: NetworkWeights,
                           q1_target: NetworkWeights, q2_target: NetworkWeights,
                           log_alpha: float, config: AgentConfig,
                           noise: np.ndarray) -> np.ndarray:
    """Bootstrapped soft targets y = r + gamma (1-done) (min Q' - alpha log pi)."""
    mu, log_std, _, _ = actor_distribution(actor, batch.next_obs)
    next_action, next_log_prob, _, _ = squash_log_prob(
        mu, log_std, noise, config.action_low, config.action_high)
    x_next = np.column_stack([batch.next_obs, next_action])
    q1 = forward(q1_target, x_next)[:, 0]
    q2 = forward(q2_target, x_next)[:, 0]
    alpha = math.exp(log_alpha)
    soft_value = np.minimum(q1, q2) - alpha * next_log_prob
    return batch.rewards + config.gamma * (1.0 - batch.dones) * soft_value


def critic_loss_and_grads(q1: NetworkWeights, q2: NetworkWeights,
                          obs: np.ndarray, actions: np.ndarray,
                          targets: np.ndarray):
    """Summed mean-squared errors of both critics and their gradients."""
    x = np.column_stack([obs, actions])
    n = x.shape[0]
    out1, cache1 = forward_cached(q1, x)
    out2, cache2 = forward_cached(q2, x)
    err1 = out1[:, 0] - targets
    err2 = out2[:, 0] - targets
    loss = float(np.mean(err1 ** 2) + np.mean(err2 ** 2))
    grads1, _ = backward_from_cache(q1, cache1, (2.0 * err1 / n)[:, None])
    grads2, _ = backward_from_cache(q2, cache2, (2.0 * err2 / n)[:, None])
    return loss, grads1, grads2


def actor_loss_and_grads(actor: NetworkWeights, q1: NetworkWeights,
                         q2: NetworkWeights, obs: np.ndarray, noise: np.ndarray,
                         log_alpha: float, config: AgentConfig):
    """Reparameterized policy loss mean(alpha log pi - min Q) and actor gradients.

    The critics are read-only here: their parameter gradients are discarded
    and only the gradient with respect to the action input flows back.
    """
    n = obs.shape[0]
    alpha = math.exp(log_alpha)
    half = config.action_halfwidth
    mu, log_std, raw_log_std, cache = actor_distribution(actor, obs)
    action, log_prob, z, tanh_z = squash_log_prob(
        mu, log_std, noise, config.action_low, config.action_high)

    x = np.column_stack([obs, action])
    out1, cache1 = forward_cached(q1, x)
    out2, cache2 = forward_cached(q2, x)
    v1, v2 = out1[:, 0], out2[:, 0]
    q_min = np.minimum(v1, v2)
    loss = float(np.mean(alpha * log_prob - q_min))

    # d loss / d q_k(s,a) = -1/n on whichever critic attains the minimum.
    pick1 = (v1 <= v2).astype(np.float64)
    up1 = (-pick1 / n)[:, None]
    up2 = (-(1.0 - pick1) / n)[:, None]
    _, gin1 = backward_from_cache(q1, cache1, up1)
    _, gin2 = backward_from_cache(q2, cache2, up2)
    d_action = gin1[:, -1] + gin2[:, -1]

    sigma = np.exp(log_std)
    one_minus_t2 = 1.0 - tanh_z ** 2
    # Chain through z: the Q path via a = c + half tanh z, the entropy path
    # via -ln(1 - tanh(z)^2), whose z-derivative is 2 tanh z.
    d_z = d_action * half * one_minus_t2 + (alpha / n) * 2.0 * tanh_z
    d_mu = d_z
    d_log_std = d_z * sigma * noise - alpha / n
    clip_mask = ((raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)).astype(np.float64)
    upstream = np.column_stack([d_mu, d_log_std * clip_mask])
    grads, _ = backward_from_cache(actor, cache, upstream)
    return loss, grads


def temperature_gradient(log_prob: np.ndarray, target_entropy: float) -> float:
    """Gradient of mean(-log_alpha (log pi + target)) with respect to log_alpha."""
    return float(-np.mean(log_prob + target_entropy))


class SacAgent:
    """Owns the networks, optimizers, replay buffer, and RNG streams."""

    FORMAT = "gasmarket-agent"
    VERSION = 1

    def __init__(self, config: AgentConfig, obs_dim: int = OBS_DIM,
                 seed: int | tuple = 0):
        self.config = config
        self.obs_dim = int(obs_dim)
        entropy = seed if isinstance(seed, tuple) else (int(seed),)
        init_rng = spawn_rng(*entropy, 10)
        self._action_rng = spawn_rng(*entropy, 11)
        self._update_rng = spawn_rng(*entropy, 12)
        self._buffer_rng = spawn_rng(*entropy, 13)

        actor_sizes = [self.obs_dim, *config.hidden, 2]
        critic_sizes = [self.obs_dim + 1, *config.hidden, 1]
        self.actor = init_network(actor_sizes, init_rng)
        self.q1 = init_network(critic_sizes, init_rng)
        self.q2 = init_network(critic_sizes, init_rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()

        self.actor_opt = adam_init(self.actor, config.lr_actor)
        self.q1_opt = adam_init(self.q1, config.lr_critic)
        self.q2_opt = adam_init(self.q2, config.lr_critic)
        self.alpha_opt = ScalarAdam(math.log(config.init_alpha), config.lr_alpha)

        self.buffer = ReplayBuffer(config.replay_capacity, self.obs_dim)
        self.env_steps = 0
        self.updates = 0

    @property
    def log_alpha(self) -> float:
        return self.alpha_opt.value

    @property
    def alpha(self) -> float:
        return math.exp(self.alpha_opt.value)

    def random_action(self) -> float:
        """Warmup exploration: uniform over the admissible log-price interval."""
        return float(self._action_rng.uniform(self.config.action_low,
                                              self.config.action_high))

    def sample_action(self, obs: np.ndarray) -> tuple[float, float]:
        return sample_action(self.actor, obs, self._action_rng,
                             self.config.action_low, self.config.action_high)

    def deterministic_action(self, obs: np.ndarray) -> float:
        return deterministic_action(self.actor, obs,
                                    self.config.action_low, self.config.action_high)

    def act(self, obs: np.ndarray) -> float:
        """Training-time action: uniform during warmup, stochastic after."""
        if self.env_steps < self.config.warmup_steps:
            return self.random_action()
        return self.sample_action(obs)[0]

    def observe(self, transition: Transition) -> None:
        self.buffer.push(transition)
        self.env_steps += 1

    def ready_to_update(self) -> bool:
        return (self.env_steps >= self.config.warmup_steps
                and len(self.buffer) >= self.config.batch_size)

    def critic_update(self, batch: TransitionBatch) -> float:
        """Step both critics toward the shared soft target; pre-step loss."""
        if len(batch) == 0:
            raise ProtocolError("empty batch")
        noise = self._update_rng.standard_normal(len(batch))
        targets = compute_critic_targets(batch, self.actor, self.q1_target,
                                         self.q2_target, self.log_alpha,
                                         self.config, noise)
        loss, grads1, grads2 = critic_loss_and_grads(
            self.q1, self.q2, batch.obs, batch.actions, targets)
        adam_step(self.q1_opt, self.q1, grads1)
        adam_step(self.q2_opt, self.q2, grads2)
        return loss

    def actor_update(self, batch: TransitionBatch) -> float:
        """Step the actor; critics are left untouched."""
        if len(batch) == 0:
            raise ProtocolError("empty batch")
        noise = self._update_rng.standard_normal(len(batch))
        loss, grads = actor_loss_and_grads(self.actor, self.q1, self.q2,
                                           batch.obs, noise, self.log_alpha,
                                           self.config)
        adam_step(self.actor_opt, self.actor, grads)
        return loss

    def temperature_update(self, batch: TransitionBatch) -> float:
        """Tune log alpha toward the target entropy; returns the new log alpha."""
        noise = self._update_rng.standard_normal(len(batch))
        mu, log_std, _, _ = actor_distribution(self.actor, batch.obs)
        _, log_prob, _, _ = squash_log_prob(mu, log_std, noise,
                                            self.config.action_low,
                                            self.config.action_high)
        grad = temperature_gradient(log_prob, self.config.target_entropy)
        return self.alpha_opt.update(grad)

    def update_targets(self) -> None:
        soft_update(self.q1_target, self.q1, self.config.polyak)
        soft_update(self.q2_target, self.q2, self.config.polyak)

    def train_step(self) -> dict:
        """One full update: critics, actor, temperature, target blend."""
        batch = self.buffer.sample(self.config.batch_size, self._buffer_rng)
        critic_loss = self.critic_update(batch)
        actor_loss = self.actor_update(batch)
        log_alpha = self.temperature_update(batch)
        self.update_targets()
        self.updates += 1
        if not (math.isfinite(critic_loss) and math.isfinite(actor_loss)
                and math.isfinite(log_alpha)):
            raise NumericError(
                f"non-finite losses at update {self.updates}: "
                f"critic={critic_loss}, actor={actor_loss}, log_alpha={log_alpha}")
        return {"critic_loss": critic_loss, "actor_loss": actor_loss,
                "log_alpha": log_alpha, "alpha": math.exp(log_alpha)}

    def config_hash(self) -> str:
        doc = asdict(self.config)
        doc["hidden"] = list(self.config.hidden)
        return sha256_of(doc)

    def to_doc(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden"] = list(self.config.hidden)
        return {
            "format": self.FORMAT,
            "version": self.VERSION,
            "config": cfg,
            "config_hash": self.config_hash(),
            "obs_dim": self.obs_dim,
            "env_steps": self.env_steps,
            "updates": self.updates,
            "actor": net_to_doc(self.actor),
            "q1": net_to_doc(self.q1),
            "q2": net_to_doc(self.q2),
            "q1_target": net_to_doc(self.q1_target),
            "q2_target": net_to_doc(self.q2_target),
            "actor_opt": adam_to_doc(self.actor_opt),
            "q1_opt": adam_to_doc(self.q1_opt),
            "q2_opt": adam_to_doc(self.q2_opt),
            "alpha_opt": self.alpha_opt.to_doc(),
            "action_rng": rng_to_doc(self._action_rng),
            "update_rng": rng_to_doc(self._update_rng),
            "buffer_rng": rng_to_doc(self._buffer_rng),
            "buffer": self.buffer.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SacAgent":
        if doc.get("format") != cls.FORMAT or doc.get("version") != cls.VERSION:
            raise FormatError(
                f"expected {cls.FORMAT} v{cls.VERSION}, got "
                f"{doc.get('format')!r} v{doc.get('version')!r}")
        cfg_doc = dict(doc["config"])
        cfg_doc["hidden"] = tuple(cfg_doc["hidden"])
        config = AgentConfig(**cfg_doc)
        agent = cls(config, obs_dim=doc["obs_dim"], seed=0)
        agent.env_steps = int(doc["env_steps"])
        agent.updates = int(doc["updates"])
        agent.actor = net_from_doc(doc["actor"])
        agent.q1 = net_from_doc(doc["q1"])
        agent.q2 = net_from_doc(doc["q2"])
        agent.q1_target = net_from_doc(doc["q1_target"])
        agent.q2_target = net_from_doc(doc["q2_target"])
        agent.actor_opt = adam_from_doc(doc["actor_opt"])
        agent.q1_opt = adam_from_doc(doc["q1_opt"])
        agent.q2_opt = adam_from_doc(doc["q2_opt"])
        agent.alpha_opt = ScalarAdam.from_doc(doc["alpha_opt"])
        agent._action_rng = rng_from_doc(doc["action_rng"])
        agent._update_rng = rng_from_doc(doc["update_rng"])
        agent._buffer_rng = rng_from_doc(doc["buffer_rng"])
        agent.buffer = ReplayBuffer.from_doc(doc["buffer"])
        return agent
