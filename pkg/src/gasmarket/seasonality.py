"""Truncated Fourier model of the seasonal demand component.

The seasonal log-demand term for integer month ``t`` is

    S(t) = sum_k a_k * cos(phi_t * k) + b_k * sin(phi_t * k),
    phi_t = 2 * pi * (t mod 12) / 12,

with the harmonic set K a collection of distinct positive divisors of 12
(default {1, 2, 3, 4, 6}).  Reducing ``t`` modulo 12 before computing the
phase makes the 12-month periodicity exact in floating point.

At monthly sampling the k = 6 sine column sin(pi * t) vanishes identically,
so its coefficient is not identifiable; fitting constrains b_6 = 0 and any
model produced by :func:`fit_coefficients` satisfies that convention.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigurationError, DataError, FitError

__all__ = [
    "DEFAULT_HARMONICS",
    "SeasonalCoefficients",
    "seasonal_value",
    "generate_series",
    "fit_coefficients",
    "coefficients_to_csv",
    "coefficients_from_csv",
    "save_coefficients",
    "load_coefficients",
    "default_coefficients",
    "reference_monthly_profile",
]

DEFAULT_HARMONICS = (1, 2, 3, 4, 6)

_MONTHS_PER_YEAR = 12


def _validate_harmonics(harmonics) -> tuple[int, ...]:
    ks = tuple(int(k) for k in harmonics)
    if len(ks) == 0:
        raise ConfigurationError("harmonic set must not be empty")
    if len(set(ks)) != len(ks):
        raise ConfigurationError(f"harmonics must be distinct, got {ks}")
    for k in ks:
        if k <= 0 or _MONTHS_PER_YEAR % k != 0:
            raise ConfigurationError(
                f"harmonic {k} is not a positive divisor of {_MONTHS_PER_YEAR}"
            )
    return ks


def _sine_degenerate(k: int) -> bool:
    # sin(2 pi k t / 12) == 0 for every integer t iff 12 divides 2k.
    return (2 * k) % _MONTHS_PER_YEAR == 0


@dataclass(frozen=True)
class SeasonalCoefficients:
    """Cosine and sine amplitudes for each harmonic, in harmonic order."""

    harmonics: tuple[int, ...]
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        ks = _validate_harmonics(self.harmonics)
        object.__setattr__(self, "harmonics", ks)
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.shape != (len(ks),) or b.shape != (len(ks),):
            raise ConfigurationError(
                f"need one (a, b) pair per harmonic: {len(ks)} harmonics, "
                f"a.shape={a.shape}, b.shape={b.shape}"
            )
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ConfigurationError("coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def zero(cls, harmonics=DEFAULT_HARMONICS) -> "SeasonalCoefficients":
        n = len(tuple(harmonics))
        return cls(tuple(harmonics), np.zeros(n), np.zeros(n))


def seasonal_value(coefficients: SeasonalCoefficients, t) -> float | np.ndarray:
    """Evaluate S(t) at integer month index t (scalar or array)."""
    t_arr = np.asarray(t)
    phase = 2.0 * np.pi * (np.mod(t_arr, _MONTHS_PER_YEAR)) / _MONTHS_PER_YEAR
    ks = np.asarray(coefficients.harmonics, dtype=np.float64)
    angles = np.multiply.outer(phase, ks)
    values = np.cos(angles) @ coefficients.a + np.sin(angles) @ coefficients.b
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(values)
    return values


def generate_series(coefficients: SeasonalCoefficients, months) -> list[tuple[int, float]]:
    """Tabulate (t, S(t)) pairs for the given integer month indices."""
    months = [int(m) for m in months]
    values = seasonal_value(coefficients, np.asarray(months))
    values = np.atleast_1d(values)
    return list(zip(months, (float(v) for v in values)))


def _design_matrix(months: np.ndarray, ks: tuple[int, ...]):
    """Columns cos(phi k) for all k then sin(phi k) for non-degenerate k."""
    phase = 2.0 * np.pi * np.mod(months, _MONTHS_PER_YEAR) / _MONTHS_PER_YEAR
    cos_cols = [np.cos(phase * k) for k in ks]
    sin_ks = [k for k in ks if not _sine_degenerate(k)]
    sin_cols = [np.sin(phase * k) for k in sin_ks]
    design = np.column_stack(cos_cols + sin_cols)
    return design, sin_ks


def fit_coefficients(monthly_series, harmonics=DEFAULT_HARMONICS) -> SeasonalCoefficients:
    """Least-squares fit of the harmonic model to (month, value) pairs.

    The series must supply at least as many observations as free
    coefficients and span at least a full year of distinct month labels so
    every harmonic is identified.  Degenerate sine columns (identically zero
    at monthly sampling) are excluded from the design and their coefficients
    reported as zero.
    """
    ks = _validate_harmonics(harmonics)
    pairs = list(monthly_series)
    if len(pairs) == 0:
        raise DataError("empty series")
    months = np.asarray([int(t) for t, _ in pairs], dtype=np.float64)
    values = np.asarray([float(v) for _, v in pairs], dtype=np.float64)
    if not np.isfinite(values).all():
        raise DataError("series contains non-finite values")

    design, sin_ks = _design_matrix(months, ks)
    n_free = design.shape[1]
    if len(pairs) < n_free:
        raise FitError(
            f"need at least {n_free} observations for {len(ks)} harmonics, got {len(pairs)}"
        )
    if len(np.unique(np.mod(months, _MONTHS_PER_YEAR))) < _MONTHS_PER_YEAR:
        raise FitError("series must cover all 12 calendar months")

    solution, _, rank, _ = np.linalg.lstsq(design, values, rcond=None)
    if rank < n_free:
        raise FitError(
            f"rank-deficient design (rank {rank} < {n_free} coefficients)"
        )

    a = solution[: len(ks)]
    b = np.zeros(len(ks))
    for j, k in enumerate(sin_ks):
        b[ks.index(k)] = solution[len(ks) + j]
    return SeasonalCoefficients(ks, a, b)


def coefficients_to_csv(coefficients: SeasonalCoefficients) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["harmonic", "a", "b"])
    for k, a_k, b_k in zip(coefficients.harmonics, coefficients.a, coefficients.b):
        writer.writerow([k, repr(float(a_k)), repr(float(b_k))])
    return buf.getvalue()


def coefficients_from_csv(text: str) -> SeasonalCoefficients:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or [c.strip() for c in rows[0]] != ["harmonic", "a", "b"]:
        raise DataError("expected header 'harmonic,a,b'")
    ks, a, b = [], [], []
    for row in rows[1:]:
        if len(row) != 3:
            raise DataError(f"malformed coefficient row: {row!r}")
        try:
            ks.append(int(row[0]))
            a.append(float(row[1]))
            b.append(float(row[2]))
        except ValueError as exc:
            raise DataError(f"malformed coefficient row: {row!r}") from exc
    try:
        return SeasonalCoefficients(tuple(ks), np.asarray(a), np.asarray(b))
    except ConfigurationError as exc:
        raise DataError(str(exc)) from exc


def save_coefficients(path: str, coefficients: SeasonalCoefficients) -> None:
    from .docio import atomic_write_text

    atomic_write_text(path, coefficients_to_csv(coefficients))


def load_coefficients(path: str) -> SeasonalCoefficients:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read coefficients file {path}: {exc}") from exc
    return coefficients_from_csv(text)


def _package_text(name: str) -> str:
    return resources.files("gasmarket.data").joinpath(name).read_text(encoding="utf-8")


def default_coefficients() -> SeasonalCoefficients:
    """Packaged winter-peaking default (fit of the reference profile)."""
    return coefficients_from_csv(_package_text("default_seasonal_coefficients.csv"))


def reference_monthly_profile() -> list[tuple[int, float]]:
    """Packaged reference log-demand deviations for months 0..11 (Jan..Dec)."""
    text = _package_text("reference_monthly_profile.csv")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or [c.strip() for c in rows[0]] != ["month", "log_demand"]:
        raise DataError("expected header 'month,log_demand'")
    out = [(int(r[0]), float(r[1])) for r in rows[1:]]
    if [m for m, _ in out] != list(range(12)):
        raise DataError("reference profile must list months 0..11 in order")
    return out
