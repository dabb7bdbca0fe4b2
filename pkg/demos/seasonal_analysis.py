"""Fit the seasonal model, simulate price paths, and run the estimators.

Run it from the repository root:

    python3 demos/seasonal_analysis.py

The script first recovers the packaged harmonic coefficients from the
reference demand profile.  It then simulates a batch of price paths under a
transparent hand-written pricing rule and applies the statistical toolkit
(seasonal dummy regression, volatility, confidence intervals, kernel
densities) to those paths.
"""

import calendar

import numpy as np

from gasmarket import (
    EpisodeTrace,
    GasMarketEnv,
    MarketParams,
    RewardWeights,
    average_series,
    default_coefficients,
    fit_coefficients,
    kde,
    labeled_log_diffs,
    mean_ci,
    price_series_from_trace,
    seasonal_regression,
    seasonal_value,
    volatility_std,
)
from gasmarket.market_env import OBS_DEMAND_SHOCK, OBS_SEASONAL, OBS_SUPPLY_SHOCK
from gasmarket.seasonality import reference_monthly_profile
from gasmarket.svgplot import LineSeries, bar_chart, line_chart, save_svg

MONTHS = [calendar.month_abbr[m] for m in range(1, 13)]

print("== Fitting harmonics to the reference demand profile ==")
profile = reference_monthly_profile()
fitted = fit_coefficients(profile)
packaged = default_coefficients()
print(f"{'harmonic':>8} {'a (fit)':>10} {'a (pkg)':>10} {'b (fit)':>10} {'b (pkg)':>10}")
for i, k in enumerate(fitted.harmonics):
    print(f"{k:>8} {fitted.a[i]:>10.5f} {packaged.a[i]:>10.5f} "
          f"{fitted.b[i]:>10.5f} {packaged.b[i]:>10.5f}")

values = seasonal_value(fitted, np.arange(12))
peak = int(np.argmax(values))
print(f"seasonal demand peaks in {MONTHS[peak]} "
      f"({values[peak]:+.3f} log points above trend)")

print("\n== Simulating price paths under a transparent rule ==")
# The rule prices the seasonal cycle and passes part of each shock through,
# so every episode shares the seasonal shape but differs in its noise.
params = MarketParams()
weights = RewardWeights()


def posted_price(obs: np.ndarray) -> float:
    return (0.35 * obs[OBS_SEASONAL]
            + 0.60 * obs[OBS_DEMAND_SHOCK]
            - 0.50 * obs[OBS_SUPPLY_SHOCK])


def play_episode(seed: int) -> EpisodeTrace:
    env = GasMarketEnv(params, weights, seed=seed)
    outcomes = []
    while not env.done:
        outcomes.append(env.step(posted_price(env.observe())))
    return EpisodeTrace.from_outcomes(outcomes)


traces = [play_episode(seed) for seed in range(30)]
series = [price_series_from_trace(t, label=f"episode-{i}")
          for i, t in enumerate(traces)]
mean_series = average_series(series)
print(f"simulated {len(series)} episodes of {len(mean_series)} months")

window = slice(0, 48)
svg = line_chart(
    [
        LineSeries(series[0].months[window] + 1.0, series[0].prices[window],
                   label="one episode"),
        LineSeries(mean_series.months[window] + 1.0, mean_series.prices[window],
                   label="mean of 30"),
    ],
    title="Traded price, first four years",
    x_label="month",
    y_label="price",
)
save_svg("demo_price_paths.svg", svg)
print("price paths written to demo_price_paths.svg")

print("\n== Estimating seasonality and volatility from the paths ==")
diff_chunks, month_chunks = zip(*(labeled_log_diffs(s) for s in series))
diffs = np.concatenate(diff_chunks)
months = np.concatenate(month_chunks)
estimate = seasonal_regression(diffs, months)

print(f"{'month':>6} {'mean dlog P':>12} {'std err':>9}")
for m in range(12):
    print(f"{MONTHS[m]:>6} {estimate.coefficients[m]:>+12.5f} "
          f"{estimate.standard_errors[m]:>9.5f}")
peak = int(np.argmax(estimate.coefficients))
print(f"prices rise fastest into {MONTHS[peak]}, "
      f"matching the demand cycle the rule was pricing")

svg = bar_chart(MONTHS, estimate.coefficients,
                errors=1.96 * estimate.standard_errors,
                title="Seasonal log-price changes",
                y_label="mean monthly log change")
save_svg("demo_seasonal_regression.svg", svg)
print("regression chart written to demo_seasonal_regression.svg")

overall_mean, half = mean_ci(diffs)
print(f"\npooled monthly log change: {overall_mean:+.5f} +/- {half:.5f} (95%)")
print(f"pooled volatility (std of log changes): {volatility_std(diffs):.4f}")

grid = np.linspace(diffs.min(), diffs.max(), 201)
density = kde(diffs, grid)
svg = line_chart(
    [LineSeries(grid, density, label="kernel density")],
    title="Distribution of monthly log-price changes",
    x_label="log change",
    y_label="density",
)
save_svg("demo_logdiff_density.svg", svg)
print("density chart written to demo_logdiff_density.svg")
