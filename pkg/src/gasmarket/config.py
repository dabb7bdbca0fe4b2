"""Experiment configuration: a strict TOML schema over the run spec.

Sections mirror the library dataclasses field for field: ``[market]`` is
:class:`MarketParams`, ``[reward]`` is :class:`RewardWeights`, ``[agent]``
is :class:`AgentConfig` minus the keys derived from the market (action
bounds and the discount), ``[run]`` holds the harness scalars,
``[seasonality]`` points at a coefficients CSV, and ``[output]`` names the
output root.  Unknown sections or keys fail loudly with their full path;
omitted keys take the library defaults.

Overrides of the form ``section.key=value`` are parsed with TOML scalar
syntax so types survive the command line.
"""

from __future__ import annotations

import dataclasses
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigurationError
from .harness import RunSpec
from .market_env import MarketParams, RewardWeights
from .sac_agent import AgentConfig
from .seasonality import SeasonalCoefficients, load_coefficients

__all__ = [
    "ExperimentConfig",
    "OUTPUT_ROOT_ENV",
    "load_config",
    "config_from_doc",
    "parse_override",
    "apply_overrides",
    "resolve_output_root",
]

OUTPUT_ROOT_ENV = "GASMARKET_OUTPUT_ROOT"
_DEFAULT_OUTPUT_ROOT = "runs"

# [agent] keys that are always derived from [market] and may not be set.
_DERIVED_AGENT_KEYS = {
    "action_low": "market.price_floor",
    "action_high": "market.price_cap",
    "gamma": "market.gamma",
}

_RUN_KEYS = ("training_steps", "checkpoint_interval", "seed", "tag",
             "checkpoint_eval_episodes", "final_eval_episodes", "eval_workers")

_SECTIONS = ("market", "reward", "agent", "run", "seasonality", "output")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved run spec plus the output root preference."""

    spec: RunSpec
    output_root: str | None = None


def _check_keys(section: str, data: dict, allowed, derived: dict | None = None):
    for key in data:
        if derived and key in derived:
            raise ConfigurationError(
                f"{section}.{key} is derived from {derived[key]}; set that instead")
        if key not in allowed:
            raise ConfigurationError(
                f"unknown key {section}.{key}; expected one of {sorted(allowed)}")


def _build_dataclass(cls, section: str, data: dict, reject: dict | None = None):
    spec_fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(section, data, spec_fields, reject)
    kwargs = {}
    for key, value in data.items():
        annotation = str(spec_fields[key].type)
        if annotation.startswith("float") and isinstance(value, int) \
                and not isinstance(value, bool):
            value = float(value)
        elif annotation.startswith("tuple") and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"[{section}]: {exc}") from exc


def config_from_doc(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    """Validate a parsed TOML document and build the run spec."""
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be a table")
    for name, value in doc.items():
        if name not in _SECTIONS:
            raise ConfigurationError(
                f"unknown section [{name}]; expected one of {list(_SECTIONS)}")
        if not isinstance(value, dict):
            raise ConfigurationError(f"[{name}] must be a table, got {value!r}")

    params = _build_dataclass(MarketParams, "market", doc.get("market", {}))
    weights = _build_dataclass(RewardWeights, "reward", doc.get("reward", {}))

    agent_data = dict(doc.get("agent", {}))
    _check_keys("agent", agent_data,
                {f.name for f in dataclasses.fields(AgentConfig)}
                - set(_DERIVED_AGENT_KEYS),
                _DERIVED_AGENT_KEYS)
    if isinstance(agent_data.get("hidden"), list):
        agent_data["hidden"] = tuple(agent_data["hidden"])
    for key, value in list(agent_data.items()):
        annotation = str({f.name: f for f in
                          dataclasses.fields(AgentConfig)}[key].type)
        if annotation.startswith("float") and isinstance(value, int) \
                and not isinstance(value, bool):
            agent_data[key] = float(value)
    try:
        agent = AgentConfig.for_market(params, **agent_data)
    except TypeError as exc:
        raise ConfigurationError(f"[agent]: {exc}") from exc

    run_data = dict(doc.get("run", {}))
    _check_keys("run", run_data, set(_RUN_KEYS))

    seasonality = doc.get("seasonality", {})
    _check_keys("seasonality", seasonality, {"coefficients"})
    coefficients: SeasonalCoefficients | None = None
    if "coefficients" in seasonality:
        path = seasonality["coefficients"]
        if not isinstance(path, str):
            raise ConfigurationError(
                f"seasonality.coefficients must be a path, got {path!r}")
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        coefficients = load_coefficients(path)

    output = doc.get("output", {})
    _check_keys("output", output, {"root"})
    output_root = output.get("root")
    if output_root is not None and not isinstance(output_root, str):
        raise ConfigurationError(f"output.root must be a string, got {output_root!r}")

    spec = RunSpec(params=params, weights=weights, agent=agent,
                   coefficients=coefficients, **run_data)
    return ExperimentConfig(spec=spec, output_root=output_root)


def parse_override(text: str) -> tuple[str, str, object]:
    """Parse one ``section.key=value`` override with TOML value syntax."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not of the form "
                                 f"section.key=value")
    path, raw = text.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigurationError(
            f"override key {path.strip()!r} must be section.key")
    section, key = parts
    raw = raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        # bare words are accepted as strings so tags need no quoting
        value = raw
    return section, key, value


def apply_overrides(doc: dict, overrides) -> dict:
    """Return a copy of the document with each override applied."""
    doc = {name: dict(table) for name, table in doc.items()}
    for text in overrides:
        section, key, value = parse_override(text)
        doc.setdefault(section, {})[key] = value
    return doc


def load_config(path: str, overrides=()) -> ExperimentConfig:
    """Read, override, validate, and resolve a TOML experiment config."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid TOML: {exc}") from exc
    doc = apply_overrides(doc, overrides)
    return config_from_doc(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def resolve_output_root(flag_value: str | None,
                        config_value: str | None) -> str:
    """Precedence: command-line flag, config file, environment, default."""
    if flag_value:
        return flag_value
    if config_value:
        return config_value
    return os.environ.get(OUTPUT_ROOT_ENV) or _DEFAULT_OUTPUT_ROOT
