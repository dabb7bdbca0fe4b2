"""Statistics over monthly price series: log differences, seasonal dummy
regression, volatility, kernel density estimates, and confidence intervals.

Everything here is a pure function over numpy arrays so the same code path
serves simulated traces and external historical data.  A month is carried as
an absolute index (0 is a January); the calendar month is its value mod 12,
written 1..12.
"""

from __future__ import annotations

import csv
import datetime
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    FitError,
    ProtocolError,
)
from .market_env import EpisodeTrace

__all__ = [
    "PriceSeries",
    "SeasonalityEstimate",
    "calendar_month",
    "price_series_from_trace",
    "load_price_csv",
    "log_diffs",
    "labeled_log_diffs",
    "seasonal_regression",
    "volatility_std",
    "kde",
    "silverman_bandwidth",
    "mean_ci",
    "average_series",
    "Z_QUANTILES",
]

_MONTHS_PER_YEAR = 12

# Two-sided normal quantiles for the supported confidence levels.
Z_QUANTILES = {0.90: 1.645, 0.95: 1.96, 0.99: 2.576}


def calendar_month(index) -> np.ndarray:
    """Calendar month 1..12 of an absolute month index (0 is a January)."""
    return np.asarray(index, dtype=np.int64) % _MONTHS_PER_YEAR + 1


@dataclass(frozen=True)
class PriceSeries:
    """Monthly prices with absolute month indices and a source label."""

    months: np.ndarray
    prices: np.ndarray
    label: str = "simulated"

    def __post_init__(self):
        months = np.asarray(self.months, dtype=np.int64)
        prices = np.asarray(self.prices, dtype=np.float64)
        if months.ndim != 1 or prices.ndim != 1 or months.size != prices.size:
            raise DataError(
                f"months and prices must be matching 1-D arrays, got shapes "
                f"{months.shape} and {prices.shape}")
        if months.size == 0:
            raise DataError("a price series cannot be empty")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0.0):
            raise DomainError(f"{self.label}: prices must be finite and positive")
        if months.size > 1 and np.any(np.diff(months) <= 0):
            raise DataError(f"{self.label}: months must be strictly increasing")
        object.__setattr__(self, "months", months)
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return self.months.size

    def calendar_months(self) -> np.ndarray:
        return calendar_month(self.months)


@dataclass(frozen=True)
class SeasonalityEstimate:
    """Per-calendar-month mean log-price change with standard errors."""

    coefficients: np.ndarray
    standard_errors: np.ndarray
    method: str = "monthly-dummy-ols"

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=np.float64)
        se = np.asarray(self.standard_errors, dtype=np.float64)
        if coef.shape != (_MONTHS_PER_YEAR,) or se.shape != (_MONTHS_PER_YEAR,):
            raise DataError(
                f"need one coefficient and one standard error per month, got "
                f"shapes {coef.shape} and {se.shape}")
        if np.any(se < 0.0) or not np.all(np.isfinite(coef)):
            raise DataError("coefficients must be finite, standard errors nonnegative")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "standard_errors", se)

    def to_doc(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "standard_errors": [float(s) for s in self.standard_errors],
            "method": self.method,
        }


def price_series_from_trace(trace: EpisodeTrace, label: str = "simulated") -> PriceSeries:
    """Traded prices of one episode as a series starting in January."""
    return PriceSeries(months=trace.t - 1, prices=trace.price, label=label)


def load_price_csv(text: str, label: str = "external") -> PriceSeries:
    """Parse a two-column CSV of ISO date and price into a monthly series.

    The month index is ``year * 12 + month - 1`` so series loaded from
    different files align on the real calendar.  A single header row is
    tolerated.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if rows and not _looks_like_data(rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{label}: no data rows")
    months, prices = [], []
    for r in rows:
        if len(r) != 2:
            raise DataError(f"{label}: expected 2 columns, got {len(r)}: {r!r}")
        try:
            date = datetime.date.fromisoformat(r[0].strip())
            price = float(r[1])
        except ValueError as exc:
            raise DataError(f"{label}: bad row {r!r}: {exc}") from exc
        months.append(date.year * _MONTHS_PER_YEAR + date.month - 1)
        prices.append(price)
    return PriceSeries(np.asarray(months), np.asarray(prices), label=label)


def _looks_like_data(row: list[str]) -> bool:
    if len(row) != 2:
        return False
    try:
        datetime.date.fromisoformat(row[0].strip())
        float(row[1])
    except ValueError:
        return False
    return True


def log_diffs(series: PriceSeries) -> np.ndarray:
    """First differences of log prices; element i is ln P_{i+1} - ln P_i."""
    if len(series) < 2:
        raise ProtocolError("need at least two prices to difference")
    return np.diff(np.log(series.prices))


def labeled_log_diffs(series: PriceSeries) -> tuple[np.ndarray, np.ndarray]:
    """Log differences with the calendar month of each difference.

    A difference is labeled by its later point: the change realized during
    that month.
    """
    return log_diffs(series), calendar_month(series.months[1:])


def seasonal_regression(diffs, months) -> SeasonalityEstimate:
    """OLS of differences on twelve month dummies with no intercept.

    With orthogonal one-hot regressors each coefficient is the within-month
    mean, and the homoskedastic standard error for month m is s/sqrt(n_m)
    with s^2 the residual variance on n - 12 degrees of freedom.  With zero
    residual degrees of freedom the errors are reported as exactly zero.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    months = np.asarray(months, dtype=np.int64)
    if diffs.ndim != 1 or diffs.shape != months.shape:
        raise DataError(
            f"diffs and months must be matching 1-D arrays, got shapes "
            f"{diffs.shape} and {months.shape}")
    if np.any((months < 1) | (months > _MONTHS_PER_YEAR)):
        raise DataError("month labels must lie in 1..12")
    coef = np.empty(_MONTHS_PER_YEAR)
    counts = np.empty(_MONTHS_PER_YEAR)
    for m in range(1, _MONTHS_PER_YEAR + 1):
        sel = months == m
        if not sel.any():
            raise FitError(f"no observations for month {m}")
        coef[m - 1] = diffs[sel].mean()
        counts[m - 1] = sel.sum()
    residuals = diffs - coef[months - 1]
    dof = diffs.size - _MONTHS_PER_YEAR
    if dof > 0:
        sigma2 = float(residuals @ residuals) / dof
        se = np.sqrt(sigma2 / counts)
    else:
        se = np.zeros(_MONTHS_PER_YEAR)
    return SeasonalityEstimate(coef, se)


def volatility_std(diffs) -> float:
    """Sample standard deviation (n - 1 denominator) of the differences."""
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.size < 2:
        raise ProtocolError("need at least two differences")
    return float(diffs.std(ddof=1))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """1.06 * sigma_hat * n^(-1/5) with the sample standard deviation."""
    samples = np.asarray(samples, dtype=np.float64)
    sigma = float(samples.std(ddof=1))
    if sigma == 0.0:
        raise DataError("zero-variance input has no meaningful density estimate")
    return 1.06 * sigma * samples.size ** (-0.2)


def kde(samples, grid) -> np.ndarray:
    """Gaussian kernel density estimate on an evaluation grid."""
    samples = np.asarray(samples, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if samples.size < 2:
        raise ProtocolError("need at least two samples")
    h = silverman_bandwidth(samples)
    z = (grid[:, None] - samples[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (samples.size * h * math.sqrt(2.0 * math.pi))


def mean_ci(samples, level: float = 0.95) -> tuple[float, float]:
    """Mean and normal-approximation half-width z * sigma_hat / sqrt(n).

    ``sigma_hat`` is the n-denominator standard deviation; at the sample
    sizes this is meant for the distinction from the n-1 form is far below
    the normal approximation error.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        raise ProtocolError("need at least two samples")
    if level not in Z_QUANTILES:
        raise ConfigurationError(
            f"level must be one of {sorted(Z_QUANTILES)}, got {level}")
    z = Z_QUANTILES[level]
    return float(samples.mean()), z * float(samples.std()) / math.sqrt(samples.size)


def average_series(series_list) -> PriceSeries:
    """Pointwise mean of aligned series, labeled as an averaged simulation."""
    series_list = list(series_list)
    if not series_list:
        raise ProtocolError("need at least one series to average")
    first = series_list[0]
    for s in series_list[1:]:
        if len(s) != len(first) or np.any(s.months != first.months):
            raise DataError(
                f"misaligned series: {s.label} does not share {first.label}'s months")
    stacked = np.stack([s.prices for s in series_list])
    return PriceSeries(first.months.copy(), stacked.mean(axis=0),
                       label="averaged-simulation")
