"""Monthly natural-gas market with seasonal demand and a storage operator.

One episode is a fixed horizon of monthly steps starting in January.  Each
step the operator posts a log price, sticky demand- and supply-side price
signals relax toward it, seasonal and autoregressive shocks set log demand
and log supply, and the storage inventory absorbs the excess demand subject
to capacity limits.  A bank account tracks interest, storage cost, the cash
flow of inventory changes, and a terminal liquidation of whatever is left in
storage at the mid signal price.  The reward is the bank change minus
penalties for price volatility, market failures (demand unmet or supply
wasted at the capacity bounds), and missing a minimum inventory level in a
designated refill month.

All dynamics are exposed as pure functions so each equation can be tested in
isolation; :class:`GasMarketEnv` only sequences them and owns the RNG.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .docio import rng_from_doc, rng_to_doc, spawn_rng
from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    NumericError,
    ProtocolError,
)
from .seasonality import SeasonalCoefficients, default_coefficients, seasonal_value

__all__ = [
    "MarketParams",
    "RewardWeights",
    "RewardParts",
    "MarketState",
    "StepOutcome",
    "EpisodeTrace",
    "GasMarketEnv",
    "reset",
    "clip_log_price",
    "update_price_signals",
    "update_shock",
    "compute_demand_supply",
    "inventory_transition",
    "check_threshold",
    "update_bank",
    "compute_reward",
    "OBS_SEASONAL",
    "OBS_COS_PHASE",
    "OBS_SIN_PHASE",
    "OBS_DEMAND_SHOCK",
    "OBS_SUPPLY_SHOCK",
    "OBS_DEMAND_SIGNAL",
    "OBS_SUPPLY_SIGNAL",
    "OBS_LOG_INVENTORY",
    "OBS_LAST_LOG_PRICE",
    "OBS_DIM",
]

# Observation vector layout.
OBS_SEASONAL = 0
OBS_COS_PHASE = 1
OBS_SIN_PHASE = 2
OBS_DEMAND_SHOCK = 3
OBS_SUPPLY_SHOCK = 4
OBS_DEMAND_SIGNAL = 5
OBS_SUPPLY_SIGNAL = 6
OBS_LOG_INVENTORY = 7
OBS_LAST_LOG_PRICE = 8
OBS_DIM = 9

_MONTHS_PER_YEAR = 12


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


@dataclass(frozen=True)
class MarketParams:
    """Market dynamics constants and episode initial conditions.

    ``price_floor`` and ``price_cap`` bound the tradable price level; the
    operator's action space is the corresponding closed log interval.
    ``initial_inventory`` of ``None`` means half of capacity.
    """

    horizon: int = 360
    eta_d: float = 0.20
    lambda_d: float = 0.975
    rho_d: float = 0.98
    sigma_d: float = 0.01
    eta_s: float = 0.30
    lambda_s: float = 0.95
    rho_s: float = 0.75
    sigma_s: float = 0.04
    i_max: float = 3.0
    storage_cost: float = 0.005
    interest_rate: float = 0.0025
    price_floor: float = 0.01
    price_cap: float = 100.0
    gamma: float = 0.99
    initial_inventory: float | None = None
    initial_bank: float = 0.0
    initial_price_signal: float = 0.0
    initial_shock: float = 0.0
    initial_log_price: float = 0.0

    def __post_init__(self):
        _require(isinstance(self.horizon, int) and self.horizon >= 1,
                 f"horizon must be a positive integer, got {self.horizon}")
        for name in ("eta_d", "eta_s"):
            _require(getattr(self, name) > 0, f"{name} must be positive")
        for name in ("lambda_d", "lambda_s"):
            v = getattr(self, name)
            _require(0.0 <= v <= 1.0, f"{name} must lie in [0, 1], got {v}")
        for name in ("rho_d", "rho_s"):
            v = getattr(self, name)
            _require(abs(v) < 1.0, f"{name} must satisfy |rho| < 1, got {v}")
        for name in ("sigma_d", "sigma_s"):
            _require(getattr(self, name) >= 0.0, f"{name} must be nonnegative")
        _require(self.i_max > 0.0, f"i_max must be positive, got {self.i_max}")
        _require(self.storage_cost >= 0.0, "storage_cost must be nonnegative")
        _require(self.interest_rate >= 0.0, "interest_rate must be nonnegative")
        _require(0.0 < self.price_floor < self.price_cap,
                 f"need 0 < price_floor < price_cap, got "
                 f"({self.price_floor}, {self.price_cap})")
        _require(0.0 < self.gamma <= 1.0, f"gamma must lie in (0, 1], got {self.gamma}")
        if self.initial_inventory is not None:
            _require(0.0 <= self.initial_inventory <= self.i_max,
                     f"initial_inventory must lie in [0, i_max], got {self.initial_inventory}")
        for name in ("initial_bank", "initial_price_signal", "initial_shock",
                     "initial_log_price"):
            _require(math.isfinite(getattr(self, name)), f"{name} must be finite")

    @property
    def action_low(self) -> float:
        return math.log(self.price_floor)

    @property
    def action_high(self) -> float:
        return math.log(self.price_cap)

    def starting_inventory(self) -> float:
        if self.initial_inventory is None:
            return self.i_max / 2.0
        return self.initial_inventory


@dataclass(frozen=True)
class RewardWeights:
    """Penalty weights and the refill-month inventory requirement."""

    price_volatility: float = 20.0
    market_failure: float = 1000.0
    threshold_miss: float = 750.0
    refill_fraction: float = 0.83
    refill_month: int = 11

    def __post_init__(self):
        for name in ("price_volatility", "market_failure", "threshold_miss"):
            _require(getattr(self, name) >= 0.0, f"{name} must be nonnegative")
        _require(0.0 <= self.refill_fraction <= 1.0,
                 f"refill_fraction must lie in [0, 1], got {self.refill_fraction}")
        _require(isinstance(self.refill_month, int) and 1 <= self.refill_month <= 12,
                 f"refill_month must be an integer in 1..12, got {self.refill_month}")


@dataclass(frozen=True)
class RewardParts:
    """Additive reward decomposition; reward = bank_change - penalties."""

    bank_change: float
    volatility_penalty: float
    failure_penalty: float
    threshold_penalty: float

    @property
    def total(self) -> float:
        return (self.bank_change - self.volatility_penalty
                - self.failure_penalty - self.threshold_penalty)


def clip_log_price(action: float, params: MarketParams) -> float:
    """Clamp a raw log-price action into the admissible log interval."""
    if not math.isfinite(action):
        raise NumericError(f"log-price action must be finite, got {action}")
    return min(max(float(action), params.action_low), params.action_high)


def update_price_signals(demand_signal: float, supply_signal: float,
                         price: float, params: MarketParams) -> tuple[float, float]:
    """Sticky price signals relax toward the posted price level.

    Each side keeps a fraction lambda of its previous price level and blends
    in (1 - lambda) of the posted price, in levels, then returns to logs.
    """
    if price <= 0.0:
        raise DomainError(f"price must be positive, got {price}")
    p_d = math.log(params.lambda_d * math.exp(demand_signal)
                   + (1.0 - params.lambda_d) * price)
    p_s = math.log(params.lambda_s * math.exp(supply_signal)
                   + (1.0 - params.lambda_s) * price)
    return p_d, p_s


def update_shock(shock: float, rho: float, sigma: float, noise: float) -> float:
    """One AR(1) transition u' = rho * u + sigma * noise."""
    return rho * shock + sigma * noise


def compute_demand_supply(seasonal: float, demand_signal: float, supply_signal: float,
                          demand_shock: float, supply_shock: float,
                          params: MarketParams) -> tuple[float, float, float]:
    """Log demand, log supply, and excess demand in levels."""
    log_demand = seasonal - params.eta_d * demand_signal + demand_shock
    log_supply = params.eta_s * supply_signal + supply_shock
    excess = math.exp(log_demand) - math.exp(log_supply)
    return log_demand, log_supply, excess


def inventory_transition(inventory: float, excess: float,
                         i_max: float) -> tuple[float, bool, float]:
    """Drain or fill storage by the excess demand, clamping at the bounds.

    Returns the next inventory, whether the market failed (storage could not
    absorb the imbalance), and the failure severity: unmet demand when the
    draw exceeds the inventory, wasted supply when the injection exceeds the
    free capacity.
    """
    if not 0.0 <= inventory <= i_max:
        raise DomainError(f"inventory {inventory} outside [0, {i_max}]")
    headroom = i_max - inventory
    if excess > inventory:
        return 0.0, True, excess - inventory
    if excess < -headroom:
        return i_max, True, -excess - headroom
    return inventory - excess, False, 0.0


def check_threshold(inventory: float, month: int, weights: RewardWeights,
                    i_max: float = 3.0) -> tuple[bool, float]:
    """Refill-month inventory check on the post-transition inventory.

    Outside the refill month the check never fires.  Inside it, the gap is
    how far inventory sits below ``refill_fraction * i_max`` (zero when the
    requirement is met).
    """
    if month != weights.refill_month:
        return False, 0.0
    gap = max(0.0, weights.refill_fraction * i_max - inventory)
    return gap > 0.0, gap


def update_bank(bank: float, inventory_prev: float, inventory_next: float,
                price: float, t: int, params: MarketParams,
                demand_signal: float, supply_signal: float) -> float:
    """Accrue interest, pay storage cost, trade inventory, liquidate at the end.

    ``t`` is the post-step month count; when it reaches the horizon the
    remaining inventory is marked to the mid point of the two signal price
    levels and added to the bank.
    """
    if not 1 <= t <= params.horizon:
        raise ProtocolError(f"bank update at step {t} outside 1..{params.horizon}")
    new_bank = ((1.0 + params.interest_rate) * bank
                - params.storage_cost * inventory_prev
                - price * (inventory_next - inventory_prev))
    if t == params.horizon:
        mark = (math.exp(demand_signal) + math.exp(supply_signal)) / 2.0
        new_bank += inventory_next * mark
    return new_bank


def compute_reward(bank_change: float, log_price: float, last_log_price: float,
                   failed: bool, failure_severity: float,
                   threshold_missed: bool, threshold_gap: float,
                   weights: RewardWeights) -> tuple[float, RewardParts]:
    """Bank change minus volatility, failure, and refill penalties."""
    volatility = weights.price_volatility * (log_price - last_log_price) ** 2
    failure = weights.market_failure * (1.0 + failure_severity) if failed else 0.0
    threshold = weights.threshold_miss * (1.0 + threshold_gap) if threshold_missed else 0.0
    parts = RewardParts(bank_change, volatility, failure, threshold)
    return parts.total, parts


@dataclass
class MarketState:
    """Complete mutable episode state, including the RNG."""

    t: int
    demand_signal: float
    supply_signal: float
    demand_shock: float
    supply_shock: float
    inventory: float
    bank: float
    last_log_price: float
    rng: np.random.Generator

    def to_doc(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "rng"}
        doc["rng"] = rng_to_doc(self.rng)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "MarketState":
        kwargs = dict(doc)
        kwargs["rng"] = rng_from_doc(kwargs.pop("rng"))
        return cls(**kwargs)


@dataclass(frozen=True)
class StepOutcome:
    """Everything produced by one environment step."""

    t: int
    month: int
    observation: np.ndarray
    price: float
    log_price: float
    demand: float
    supply: float
    excess_demand: float
    inventory: float
    bank: float
    reward: float
    reward_parts: RewardParts
    failed: bool
    failure_severity: float
    threshold_missed: bool
    threshold_gap: float
    done: bool


TRACE_COLUMNS = ("t", "month", "price", "log_price", "demand", "supply",
                 "excess_demand", "inventory", "bank", "reward",
                 "m", "m_tilde", "n", "n_tilde")


@dataclass
class EpisodeTrace:
    """Columnar per-step record of one episode, exportable as CSV."""

    t: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    month: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    price: np.ndarray = field(default_factory=lambda: np.empty(0))
    log_price: np.ndarray = field(default_factory=lambda: np.empty(0))
    demand: np.ndarray = field(default_factory=lambda: np.empty(0))
    supply: np.ndarray = field(default_factory=lambda: np.empty(0))
    excess_demand: np.ndarray = field(default_factory=lambda: np.empty(0))
    inventory: np.ndarray = field(default_factory=lambda: np.empty(0))
    bank: np.ndarray = field(default_factory=lambda: np.empty(0))
    reward: np.ndarray = field(default_factory=lambda: np.empty(0))
    m: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    m_tilde: np.ndarray = field(default_factory=lambda: np.empty(0))
    n: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    n_tilde: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return self.t.size

    @classmethod
    def from_outcomes(cls, outcomes: list[StepOutcome]) -> "EpisodeTrace":
        return cls(
            t=np.asarray([o.t for o in outcomes], dtype=np.int64),
            month=np.asarray([o.month for o in outcomes], dtype=np.int64),
            price=np.asarray([o.price for o in outcomes]),
            log_price=np.asarray([o.log_price for o in outcomes]),
            demand=np.asarray([o.demand for o in outcomes]),
            supply=np.asarray([o.supply for o in outcomes]),
            excess_demand=np.asarray([o.excess_demand for o in outcomes]),
            inventory=np.asarray([o.inventory for o in outcomes]),
            bank=np.asarray([o.bank for o in outcomes]),
            reward=np.asarray([o.reward for o in outcomes]),
            m=np.asarray([int(o.failed) for o in outcomes], dtype=np.int64),
            m_tilde=np.asarray([o.failure_severity for o in outcomes]),
            n=np.asarray([int(o.threshold_missed) for o in outcomes], dtype=np.int64),
            n_tilde=np.asarray([o.threshold_gap for o in outcomes]),
        )

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for i in range(len(self)):
            writer.writerow([
                int(self.t[i]), int(self.month[i]),
                repr(float(self.price[i])), repr(float(self.log_price[i])),
                repr(float(self.demand[i])), repr(float(self.supply[i])),
                repr(float(self.excess_demand[i])), repr(float(self.inventory[i])),
                repr(float(self.bank[i])), repr(float(self.reward[i])),
                int(self.m[i]), repr(float(self.m_tilde[i])),
                int(self.n[i]), repr(float(self.n_tilde[i])),
            ])
        return buf.getvalue()

    def to_csv(self, path: str) -> None:
        from .docio import atomic_write_text

        atomic_write_text(path, self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "EpisodeTrace":
        reader = csv.reader(io.StringIO(text))
        rows = [row for row in reader if row]
        if not rows or tuple(c.strip() for c in rows[0]) != TRACE_COLUMNS:
            raise DataError(
                f"expected trace header {','.join(TRACE_COLUMNS)!r}"
            )
        cols = {name: [] for name in TRACE_COLUMNS}
        for row in rows[1:]:
            if len(row) != len(TRACE_COLUMNS):
                raise DataError(f"malformed trace row: {row!r}")
            try:
                for name, cell in zip(TRACE_COLUMNS, row):
                    cols[name].append(int(cell) if name in ("t", "month", "m", "n")
                                      else float(cell))
            except ValueError as exc:
                raise DataError(f"malformed trace row: {row!r}") from exc
        return cls(**{
            name: np.asarray(cols[name],
                             dtype=np.int64 if name in ("t", "month", "m", "n") else np.float64)
            for name in TRACE_COLUMNS
        })

    @classmethod
    def from_csv(cls, path: str) -> "EpisodeTrace":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read trace {path}: {exc}") from exc
        return cls.from_csv_text(text)


class GasMarketEnv:
    """Sequenced market dynamics with an owned RNG.

    The constructor seeds a fresh episode; ``reset`` starts another one.
    ``seed`` may be an integer, a tuple of integers (an entropy path), or a
    ready generator.
    """

    def __init__(self, params: MarketParams = MarketParams(),
                 weights: RewardWeights = RewardWeights(),
                 coefficients: SeasonalCoefficients | None = None,
                 seed: int | tuple | np.random.Generator = 0):
        self.params = params
        self.weights = weights
        self.coefficients = coefficients if coefficients is not None else default_coefficients()
        table = seasonal_value(self.coefficients, np.arange(_MONTHS_PER_YEAR))
        self._seasonal_table = np.asarray(table, dtype=np.float64)
        phase = 2.0 * np.pi * np.arange(_MONTHS_PER_YEAR) / _MONTHS_PER_YEAR
        self._cos_table = np.cos(phase)
        self._sin_table = np.sin(phase)
        self._state: MarketState | None = None
        self.reset(seed=seed)

    @staticmethod
    def _as_rng(seed) -> np.random.Generator:
        if isinstance(seed, np.random.Generator):
            return seed
        if isinstance(seed, tuple):
            return spawn_rng(*seed)
        return spawn_rng(int(seed))

    @property
    def state(self) -> MarketState:
        return self._state

    @property
    def t(self) -> int:
        return self._state.t

    @property
    def done(self) -> bool:
        return self._state.t >= self.params.horizon

    @property
    def action_bounds(self) -> tuple[float, float]:
        return self.params.action_low, self.params.action_high

    def reset(self, seed: int | tuple | np.random.Generator = 0) -> np.ndarray:
        p = self.params
        self._state = MarketState(
            t=0,
            demand_signal=p.initial_price_signal,
            supply_signal=p.initial_price_signal,
            demand_shock=p.initial_shock,
            supply_shock=p.initial_shock,
            inventory=p.starting_inventory(),
            bank=p.initial_bank,
            last_log_price=p.initial_log_price,
            rng=self._as_rng(seed),
        )
        return self.observe()

    def observe(self) -> np.ndarray:
        """Nine-component observation of the current state."""
        st = self._state
        month_index = st.t % _MONTHS_PER_YEAR
        obs = np.empty(OBS_DIM, dtype=np.float64)
        obs[OBS_SEASONAL] = self._seasonal_table[month_index]
        obs[OBS_COS_PHASE] = self._cos_table[month_index]
        obs[OBS_SIN_PHASE] = self._sin_table[month_index]
        obs[OBS_DEMAND_SHOCK] = st.demand_shock
        obs[OBS_SUPPLY_SHOCK] = st.supply_shock
        obs[OBS_DEMAND_SIGNAL] = st.demand_signal
        obs[OBS_SUPPLY_SIGNAL] = st.supply_signal
        obs[OBS_LOG_INVENTORY] = math.log(0.5 + st.inventory)
        obs[OBS_LAST_LOG_PRICE] = st.last_log_price
        return obs

    def step(self, action: float) -> StepOutcome:
        """Advance one month under the posted log price."""
        st = self._state
        params = self.params
        if st.t >= params.horizon:
            raise ProtocolError("step called on a finished episode; call reset first")

        log_price = clip_log_price(float(action), params)
        price = math.exp(log_price)
        demand_signal, supply_signal = update_price_signals(
            st.demand_signal, st.supply_signal, price, params)

        month_index = st.t % _MONTHS_PER_YEAR
        seasonal = float(self._seasonal_table[month_index])
        noise_d = float(st.rng.standard_normal())
        noise_s = float(st.rng.standard_normal())
        demand_shock = update_shock(st.demand_shock, params.rho_d, params.sigma_d, noise_d)
        supply_shock = update_shock(st.supply_shock, params.rho_s, params.sigma_s, noise_s)

        log_demand, log_supply, excess = compute_demand_supply(
            seasonal, demand_signal, supply_signal, demand_shock, supply_shock, params)
        inventory, failed, severity = inventory_transition(
            st.inventory, excess, params.i_max)

        month = month_index + 1
        missed, gap = check_threshold(inventory, month, self.weights, params.i_max)

        t_next = st.t + 1
        bank = update_bank(st.bank, st.inventory, inventory, price, t_next,
                           params, demand_signal, supply_signal)
        reward, parts = compute_reward(bank - st.bank, log_price, st.last_log_price,
                                       failed, severity, missed, gap, self.weights)
        if not (math.isfinite(bank) and math.isfinite(reward)):
            raise NumericError(
                f"non-finite step result at t={t_next}: bank={bank}, reward={reward}")

        st.t = t_next
        st.demand_signal = demand_signal
        st.supply_signal = supply_signal
        st.demand_shock = demand_shock
        st.supply_shock = supply_shock
        st.inventory = inventory
        st.bank = bank
        st.last_log_price = log_price

        return StepOutcome(
            t=t_next, month=month, observation=self.observe(),
            price=price, log_price=log_price,
            demand=math.exp(log_demand), supply=math.exp(log_supply),
            excess_demand=excess, inventory=inventory, bank=bank,
            reward=reward, reward_parts=parts,
            failed=failed, failure_severity=severity,
            threshold_missed=missed, threshold_gap=gap,
            done=t_next >= params.horizon,
        )

    def get_state(self) -> dict:
        """Serializable snapshot sufficient to resume bit-identically."""
        return self._state.to_doc()

    def set_state(self, doc: dict) -> None:
        self._state = MarketState.from_doc(doc)


def reset(params: MarketParams = MarketParams(),
          weights: RewardWeights = RewardWeights(),
          seed: int | tuple | np.random.Generator = 0,
          coefficients: SeasonalCoefficients | None = None,
          ) -> tuple[GasMarketEnv, np.ndarray]:
    """Build a freshly seeded environment and return it with its observation."""
    env = GasMarketEnv(params, weights, coefficients, seed)
    return env, env.observe()
