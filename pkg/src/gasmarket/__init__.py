"""Reproducible monthly natural-gas market simulator with a storage operator
trained by soft actor-critic, plus the statistical tooling used to study the
resulting price paths.

The package splits into independently testable layers: pure market dynamics
(:mod:`gasmarket.market_env`), harmonic seasonality
(:mod:`gasmarket.seasonality`), a from-scratch numpy network stack
(:mod:`gasmarket.neuralnet`) under a soft actor-critic agent
(:mod:`gasmarket.sac_agent`), the training and evaluation harness
(:mod:`gasmarket.harness`), price-series statistics
(:mod:`gasmarket.analysis`), and the TOML-configured command line
(:mod:`gasmarket.cli`).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    FitError,
    FormatError,
    GasMarketError,
    NumericError,
    ProtocolError,
    ShapeError,
)
from .market_env import (
    OBS_DIM,
    EpisodeTrace,
    GasMarketEnv,
    MarketParams,
    MarketState,
    RewardParts,
    RewardWeights,
    StepOutcome,
    check_threshold,
    clip_log_price,
    compute_demand_supply,
    compute_reward,
    inventory_transition,
    reset,
    update_bank,
    update_price_signals,
    update_shock,
)
from .seasonality import (
    DEFAULT_HARMONICS,
    SeasonalCoefficients,
    default_coefficients,
    fit_coefficients,
    generate_series,
    load_coefficients,
    save_coefficients,
    seasonal_value,
)
from .neuralnet import NetworkWeights, forward, init_network
from .sac_agent import (
    AgentConfig,
    ReplayBuffer,
    SacAgent,
    Transition,
    deterministic_action,
    sample_action,
)
from .harness import (
    CheckpointEntry,
    MetricStat,
    MetricsReport,
    RunSpec,
    SweepResult,
    TrainResult,
    aggregate_seed_means,
    evaluate,
    evaluate_checkpoint,
    load_checkpoint,
    metrics_from_traces,
    run_episode,
    seed_protocol,
    select_best,
    sweep_sigma_s,
    train,
)
from .analysis import (
    PriceSeries,
    SeasonalityEstimate,
    average_series,
    kde,
    labeled_log_diffs,
    load_price_csv,
    log_diffs,
    mean_ci,
    price_series_from_trace,
    seasonal_regression,
    volatility_std,
)
from .config import ExperimentConfig, load_config

__all__ = [
    "__version__",
    "GasMarketError", "ConfigurationError", "DataError", "FormatError",
    "FitError", "DomainError", "ProtocolError", "ShapeError", "NumericError",
    "MarketParams", "RewardWeights", "RewardParts", "MarketState",
    "StepOutcome", "EpisodeTrace", "GasMarketEnv", "reset", "OBS_DIM",
    "clip_log_price", "update_price_signals", "update_shock",
    "compute_demand_supply", "inventory_transition", "check_threshold",
    "update_bank", "compute_reward",
    "SeasonalCoefficients", "DEFAULT_HARMONICS", "seasonal_value",
    "generate_series", "fit_coefficients", "default_coefficients",
    "save_coefficients", "load_coefficients",
    "NetworkWeights", "init_network", "forward",
    "AgentConfig", "SacAgent", "Transition", "ReplayBuffer",
    "sample_action", "deterministic_action",
    "RunSpec", "MetricStat", "MetricsReport", "TrainResult",
    "CheckpointEntry", "SweepResult", "train", "evaluate",
    "evaluate_checkpoint", "load_checkpoint", "run_episode",
    "metrics_from_traces", "aggregate_seed_means", "seed_protocol",
    "select_best", "sweep_sigma_s",
    "PriceSeries", "SeasonalityEstimate", "log_diffs", "labeled_log_diffs",
    "seasonal_regression", "volatility_std", "kde", "mean_ci",
    "average_series", "price_series_from_trace", "load_price_csv",
    "ExperimentConfig", "load_config",
]
