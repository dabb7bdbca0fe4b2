"""Training loop, checkpointing, evaluation protocol, and the robustness sweep.

A run is described by a :class:`RunSpec` and materializes as a directory:
``run.json`` (resolved spec), ``checkpoints/step_*.json``,
``training_log.csv`` (step, eval_reward), ``metrics.json`` and
``traces/trace_*.csv`` from the final evaluation, and a ``meta.json``
sidecar holding the only non-deterministic bits (timestamps).  Identical
specs and seeds reproduce every artifact byte for byte except that sidecar.

Episodes are chained: after each horizon the environment reseeds from
(run seed, stream, episode index), so trajectories depend only on the spec
and not on wall-clock or execution order.  Evaluation uses the
deterministic policy, never mutates the agent, and may fan episodes out to
a process pool; results are aggregated by episode index so worker count
cannot change any number.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__ as _package_version
from .docio import atomic_write_text, read_json, sha256_of, write_json
from .errors import (
    ConfigurationError,
    DataError,
    FormatError,
    NumericError,
    ProtocolError,
)
from .market_env import EpisodeTrace, GasMarketEnv, MarketParams, RewardWeights
from .neuralnet import NetworkWeights, net_from_doc, net_to_doc
from .sac_agent import AgentConfig, SacAgent, Transition, deterministic_action
from .seasonality import SeasonalCoefficients, default_coefficients

__all__ = [
    "RunSpec",
    "MetricStat",
    "MetricsReport",
    "CheckpointEntry",
    "TrainResult",
    "SeedProtocolResult",
    "SweepResult",
    "run_episode",
    "metrics_from_traces",
    "train",
    "evaluate",
    "evaluate_checkpoint",
    "load_checkpoint",
    "seed_protocol",
    "aggregate_seed_means",
    "select_best",
    "sweep_sigma_s",
]

CHECKPOINT_FORMAT = "gasmarket-checkpoint"
CHECKPOINT_VERSION = 1

# Entropy stream tags so independent RNG consumers never collide.
_STREAM_AGENT = 0
_STREAM_TRAIN_EPISODES = 1
_STREAM_EVAL = 2


def _coefficients_doc(coefficients: SeasonalCoefficients) -> dict:
    return {
        "harmonics": list(coefficients.harmonics),
        "a": [float(v) for v in coefficients.a],
        "b": [float(v) for v in coefficients.b],
    }


def _coefficients_from_doc(doc: dict) -> SeasonalCoefficients:
    return SeasonalCoefficients(tuple(doc["harmonics"]),
                                np.asarray(doc["a"]), np.asarray(doc["b"]))


@dataclass(frozen=True)
class RunSpec:
    """Everything that determines a training run."""

    params: MarketParams
    weights: RewardWeights
    agent: AgentConfig
    training_steps: int = 100_000
    checkpoint_interval: int = 4_000
    seed: int = 0
    tag: str = "run"
    coefficients: SeasonalCoefficients | None = None
    checkpoint_eval_episodes: int = 50
    final_eval_episodes: int = 50
    eval_workers: int = 1

    def __post_init__(self):
        if self.training_steps < 1:
            raise ConfigurationError("training_steps must be positive")
        if self.checkpoint_interval < 1:
            raise ConfigurationError("checkpoint_interval must be positive")
        if (self.training_steps % self.checkpoint_interval != 0
                and self.checkpoint_interval < self.training_steps):
            raise ConfigurationError(
                f"checkpoint_interval {self.checkpoint_interval} must divide or "
                f"bound training_steps {self.training_steps}")
        if self.checkpoint_eval_episodes < 1 or self.final_eval_episodes < 1:
            raise ConfigurationError("evaluation episode counts must be positive")
        if self.eval_workers < 1:
            raise ConfigurationError("eval_workers must be positive")
        if not self.tag or any(c in self.tag for c in "/\\"):
            raise ConfigurationError(f"tag must be a plain name, got {self.tag!r}")
        for name, agent_val, market_val in (
                ("action_low", self.agent.action_low, self.params.action_low),
                ("action_high", self.agent.action_high, self.params.action_high),
                ("gamma", self.agent.gamma, self.params.gamma)):
            if abs(agent_val - market_val) > 1e-12:
                raise ConfigurationError(
                    f"agent.{name} {agent_val} disagrees with the market's {market_val}")

    def resolved_coefficients(self) -> SeasonalCoefficients:
        return self.coefficients if self.coefficients is not None else default_coefficients()

    def to_doc(self) -> dict:
        # eval_workers is deliberately absent: parallelism cannot change any
        # number, so it is not part of the experiment's identity.
        params = asdict(self.params)
        weights = asdict(self.weights)
        agent = asdict(self.agent)
        agent["hidden"] = list(self.agent.hidden)
        return {
            "params": params,
            "weights": weights,
            "agent": agent,
            "training_steps": self.training_steps,
            "checkpoint_interval": self.checkpoint_interval,
            "seed": self.seed,
            "tag": self.tag,
            "coefficients": _coefficients_doc(self.resolved_coefficients()),
            "checkpoint_eval_episodes": self.checkpoint_eval_episodes,
            "final_eval_episodes": self.final_eval_episodes,
        }

    @classmethod
    def from_doc(cls, doc: dict, eval_workers: int = 1) -> "RunSpec":
        agent = dict(doc["agent"])
        agent["hidden"] = tuple(agent["hidden"])
        return cls(
            params=MarketParams(**doc["params"]),
            weights=RewardWeights(**doc["weights"]),
            agent=AgentConfig(**agent),
            training_steps=doc["training_steps"],
            checkpoint_interval=doc["checkpoint_interval"],
            seed=doc["seed"],
            tag=doc["tag"],
            coefficients=_coefficients_from_doc(doc["coefficients"]),
            checkpoint_eval_episodes=doc["checkpoint_eval_episodes"],
            final_eval_episodes=doc["final_eval_episodes"],
            eval_workers=eval_workers,
        )

    def spec_hash(self) -> str:
        return sha256_of(self.to_doc())


@dataclass(frozen=True)
class MetricStat:
    mean: float
    se: float

    def __post_init__(self):
        if self.se < 0.0:
            raise ConfigurationError("standard error must be nonnegative")

    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.se
        return self.mean - half, self.mean + half


@dataclass(frozen=True)
class MetricsReport:
    """Per-episode metric means with standard errors across episodes."""

    total_reward: MetricStat
    terminal_bank: MetricStat
    mean_sq_log_price_change: MetricStat
    success_rate: MetricStat
    refill_month_inventory: MetricStat
    mean_price: MetricStat
    n_episodes: int

    def __post_init__(self):
        if not 0.0 <= self.success_rate.mean <= 1.0:
            raise ConfigurationError("success rate must lie in [0, 1]")

    def to_doc(self) -> dict:
        doc = {}
        for name in ("total_reward", "terminal_bank", "mean_sq_log_price_change",
                     "success_rate", "refill_month_inventory", "mean_price"):
            stat: MetricStat = getattr(self, name)
            doc[name] = {"mean": stat.mean, "se": stat.se}
        doc["n_episodes"] = self.n_episodes
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "MetricsReport":
        kwargs = {name: MetricStat(v["mean"], v["se"])
                  for name, v in doc.items() if name != "n_episodes"}
        return cls(n_episodes=doc["n_episodes"], **kwargs)


def _stat(values: np.ndarray) -> MetricStat:
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return MetricStat(mean, 0.0)
    se = float(values.std(ddof=1) / math.sqrt(values.size))
    return MetricStat(mean, se)


def metrics_from_traces(traces: list[EpisodeTrace], params: MarketParams,
                        weights: RewardWeights) -> MetricsReport:
    """Aggregate per-episode scalars into means with standard errors."""
    if not traces:
        raise ProtocolError("cannot compute metrics from zero traces")
    rewards, banks, vols, successes, refills, prices = [], [], [], [], [], []
    for trace in traces:
        rewards.append(trace.reward.sum())
        banks.append(trace.bank[-1])
        diffs = np.diff(trace.log_price, prepend=params.initial_log_price)
        vols.append(np.mean(diffs ** 2))
        successes.append(1.0 - trace.m.mean())
        in_month = trace.month == weights.refill_month
        refills.append(float(trace.inventory[in_month].mean()) if in_month.any()
                       else float("nan"))
        prices.append(trace.price.mean())
    return MetricsReport(
        total_reward=_stat(rewards),
        terminal_bank=_stat(banks),
        mean_sq_log_price_change=_stat(vols),
        success_rate=_stat(successes),
        refill_month_inventory=_stat(refills),
        mean_price=_stat(prices),
        n_episodes=len(traces),
    )


def run_episode(actor: NetworkWeights, params: MarketParams,
                weights: RewardWeights, coefficients: SeasonalCoefficients,
                seed: int | tuple) -> EpisodeTrace:
    """One full deterministic-policy episode."""
    env = GasMarketEnv(params, weights, coefficients, seed=seed)
    obs = env.observe()
    outcomes = []
    low, high = params.action_low, params.action_high
    while not env.done:
        action = deterministic_action(actor, obs, low, high)
        out = env.step(action)
        outcomes.append(out)
        obs = out.observation
    return EpisodeTrace.from_outcomes(outcomes)


def _episode_worker(payload) -> EpisodeTrace:
    actor_doc, params_doc, weights_doc, coeffs_doc, entropy = payload
    return run_episode(net_from_doc(actor_doc),
                       MarketParams(**params_doc),
                       RewardWeights(**weights_doc),
                       _coefficients_from_doc(coeffs_doc),
                       tuple(entropy))


def evaluate(actor: NetworkWeights, params: MarketParams, weights: RewardWeights,
             coefficients: SeasonalCoefficients | None, n_episodes: int,
             seed: int | tuple = 0, workers: int = 1,
             ) -> tuple[MetricsReport, list[EpisodeTrace]]:
    """Independent deterministic episodes; aggregation is order-insensitive.

    Episode i draws its environment stream from (seed, eval-stream, i), so
    reports depend only on (actor, params, weights, coefficients, seed).
    """
    if n_episodes < 1:
        raise ProtocolError("n_episodes must be positive")
    coefficients = coefficients if coefficients is not None else default_coefficients()
    base = seed if isinstance(seed, tuple) else (int(seed),)
    entropies = [(*base, _STREAM_EVAL, i) for i in range(n_episodes)]
    if workers <= 1 or n_episodes == 1:
        traces = [run_episode(actor, params, weights, coefficients, e)
                  for e in entropies]
    else:
        payloads = [(net_to_doc(actor), asdict(params), asdict(weights),
                     _coefficients_doc(coefficients), list(e)) for e in entropies]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_episode_worker, payloads))
    return metrics_from_traces(traces, params, weights), traces


@dataclass(frozen=True)
class CheckpointEntry:
    step: int
    eval_reward: float
    path: str


@dataclass
class TrainResult:
    run_dir: str
    checkpoints: list[CheckpointEntry]
    log_rows: list[tuple[int, float]]
    report: MetricsReport
    agent: SacAgent
    episode_index: int


def _write_training_log(path: str, rows: list[tuple[int, float]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "eval_reward"])
    for step, reward in rows:
        writer.writerow([step, repr(float(reward))])
    atomic_write_text(path, buf.getvalue())


def _save_checkpoint(path: str, spec: RunSpec, agent: SacAgent,
                     env: GasMarketEnv, episode_index: int) -> None:
    write_json(path, {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec_hash": spec.spec_hash(),
        "run": spec.to_doc(),
        "episode_index": episode_index,
        "env_state": env.get_state(),
        "agent": agent.to_doc(),
    })


def load_checkpoint(path: str) -> dict:
    """Read and validate a checkpoint document."""
    try:
        doc = read_json(path)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise FormatError(
            f"{path}: expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, got "
            f"{doc.get('format')!r} v{doc.get('version')!r}")
    return doc


def evaluate_checkpoint(path: str, n_episodes: int, seed: int | tuple = 0,
                        workers: int = 1, sigma_s: float | None = None,
                        ) -> tuple[MetricsReport, list[EpisodeTrace]]:
    """Evaluate a stored policy, optionally overriding the supply volatility."""
    doc = load_checkpoint(path)
    spec = RunSpec.from_doc(doc["run"])
    params = spec.params if sigma_s is None else replace(spec.params, sigma_s=sigma_s)
    actor = net_from_doc(doc["agent"]["actor"])
    return evaluate(actor, params, spec.weights, spec.resolved_coefficients(),
                    n_episodes, seed=seed, workers=workers)


def train(spec: RunSpec, run_dir: str, resume_from: str | None = None) -> TrainResult:
    """Run (or resume) one training run, writing all artifacts under run_dir."""
    os.makedirs(run_dir, exist_ok=True)
    coefficients = spec.resolved_coefficients()
    write_json(os.path.join(run_dir, "run.json"), spec.to_doc())
    write_json(os.path.join(run_dir, "meta.json"), {
        "created_unix": time.time(),
        "package_version": _package_version,
        "spec_hash": spec.spec_hash(),
    })
    ckpt_dir = os.path.join(run_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)

    log_rows: list[tuple[int, float]] = []
    checkpoints: list[CheckpointEntry] = []
    if resume_from is None:
        agent = SacAgent(spec.agent, seed=(spec.seed, _STREAM_AGENT))
        episode_index = 0
        env = GasMarketEnv(spec.params, spec.weights, coefficients,
                           seed=(spec.seed, _STREAM_TRAIN_EPISODES, 0))
    else:
        doc = load_checkpoint(resume_from)
        if doc["spec_hash"] != spec.spec_hash():
            raise ConfigurationError(
                f"checkpoint {resume_from} belongs to a different run spec")
        agent = SacAgent.from_doc(doc["agent"])
        episode_index = int(doc["episode_index"])
        env = GasMarketEnv(spec.params, spec.weights, coefficients, seed=0)
        env.set_state(doc["env_state"])
        for step, reward in _read_training_log(run_dir):
            if step <= agent.env_steps:
                log_rows.append((step, reward))
                checkpoints.append(CheckpointEntry(
                    step, reward, os.path.join(ckpt_dir, _ckpt_name(step))))

    obs = env.observe()
    while agent.env_steps < spec.training_steps:
        action = agent.act(obs)
        out = env.step(action)
        agent.observe(Transition(obs, action, out.reward, out.observation, out.done))
        obs = out.observation
        if out.done:
            episode_index += 1
            obs = env.reset(seed=(spec.seed, _STREAM_TRAIN_EPISODES, episode_index))
        step = agent.env_steps
        if agent.ready_to_update():
            for _ in range(spec.agent.updates_per_step):
                try:
                    agent.train_step()
                except NumericError as exc:
                    write_json(os.path.join(run_dir, "diagnostics.json"), {
                        "error": str(exc), "step": step,
                        "episode_index": episode_index,
                        "spec_hash": spec.spec_hash(),
                    })
                    raise
        if step % spec.checkpoint_interval == 0 or step == spec.training_steps:
            report, _ = evaluate(agent.actor, spec.params, spec.weights,
                                 coefficients, spec.checkpoint_eval_episodes,
                                 seed=(spec.seed, _STREAM_EVAL, step),
                                 workers=spec.eval_workers)
            path = os.path.join(ckpt_dir, _ckpt_name(step))
            _save_checkpoint(path, spec, agent, env, episode_index)
            log_rows.append((step, report.total_reward.mean))
            checkpoints.append(CheckpointEntry(step, report.total_reward.mean, path))
            _write_training_log(os.path.join(run_dir, "training_log.csv"), log_rows)

    report, traces = evaluate(agent.actor, spec.params, spec.weights, coefficients,
                              spec.final_eval_episodes,
                              seed=(spec.seed, _STREAM_EVAL, spec.training_steps + 1),
                              workers=spec.eval_workers)
    write_json(os.path.join(run_dir, "metrics.json"), report.to_doc())
    traces_dir = os.path.join(run_dir, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    for i, trace in enumerate(traces):
        trace.to_csv(os.path.join(traces_dir, f"trace_{i:03d}.csv"))
    return TrainResult(run_dir, checkpoints, log_rows, report, agent, episode_index)


def _ckpt_name(step: int) -> str:
    return f"step_{step:08d}.json"


def _read_training_log(run_dir: str) -> list[tuple[int, float]]:
    path = os.path.join(run_dir, "training_log.csv")
    if not os.path.exists(path):
        return []
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["step", "eval_reward"]:
        raise DataError(f"malformed training log {path}")
    return [(int(r[0]), float(r[1])) for r in rows[1:]]


def select_best(checkpoints: list[CheckpointEntry]) -> CheckpointEntry:
    """Highest evaluation reward; ties broken by the later training step."""
    if not checkpoints:
        raise ProtocolError("no checkpoints to select from")
    return max(checkpoints, key=lambda e: (e.eval_reward, e.step))


def aggregate_seed_means(means) -> tuple[float, float]:
    """Cross-seed mean and standard error of per-seed mean rewards."""
    arr = np.asarray(means, dtype=np.float64)
    if arr.size < 2:
        raise ProtocolError("need at least two per-seed means")
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass(frozen=True)
class SeedProtocolResult:
    per_seed: list[tuple[int, float]]
    mean: float
    se: float

    def to_doc(self) -> dict:
        return {"per_seed": [{"seed": s, "mean_reward": r} for s, r in self.per_seed],
                "mean": self.mean, "se": self.se}


def seed_protocol(spec: RunSpec, n_train_seeds: int, n_test_runs: int,
                  out_root: str) -> SeedProtocolResult:
    """Multi-seed protocol: train per seed, evaluate the best checkpoint.

    Per-seed mean rewards are averaged across seeds and reported with the
    cross-seed standard error.
    """
    if n_train_seeds < 2:
        raise ConfigurationError("need at least two training seeds")
    per_seed = []
    for i in range(n_train_seeds):
        seed = spec.seed + i
        sub = replace(spec, seed=seed, final_eval_episodes=n_test_runs)
        result = train(sub, os.path.join(out_root, f"{spec.tag}-seed{seed:04d}"))
        best = select_best(result.checkpoints)
        report, _ = evaluate_checkpoint(best.path, n_test_runs,
                                        seed=(seed, 3), workers=spec.eval_workers)
        per_seed.append((seed, report.total_reward.mean))
    mean, se = aggregate_seed_means([r for _, r in per_seed])
    return SeedProtocolResult(per_seed, mean, se)


@dataclass(frozen=True)
class SweepResult:
    sigma_grid: tuple[float, ...]
    baseline: list[MetricsReport]
    regulated: list[MetricsReport]

    def to_doc(self) -> dict:
        return {
            "sigma_grid": list(self.sigma_grid),
            "baseline": [r.to_doc() for r in self.baseline],
            "regulated": [r.to_doc() for r in self.regulated],
        }


def sweep_sigma_s(baseline_checkpoint: str, regulated_checkpoint: str,
                  sigma_grid, n_episodes: int, seed: int = 0,
                  workers: int = 1) -> SweepResult:
    """Evaluate two frozen policies across supply-volatility overrides.

    Both policies face the same per-grid-point evaluation seeds, so curve
    differences reflect the policies, not sampling luck.
    """
    grid = tuple(float(s) for s in sigma_grid)
    if not grid or any(s < 0 for s in grid):
        raise ConfigurationError(f"invalid sigma grid {grid}")
    baseline_reports, regulated_reports = [], []
    for sigma in grid:
        b_report, _ = evaluate_checkpoint(baseline_checkpoint, n_episodes,
                                          seed=seed, workers=workers, sigma_s=sigma)
        r_report, _ = evaluate_checkpoint(regulated_checkpoint, n_episodes,
                                          seed=seed, workers=workers, sigma_s=sigma)
        baseline_reports.append(b_report)
        regulated_reports.append(r_report)
    return SweepResult(grid, baseline_reports, regulated_reports)
