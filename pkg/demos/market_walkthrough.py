"""A guided tour of the market dynamics, one equation at a time.

Run it from the repository root:

    python3 demos/market_walkthrough.py

The script first exercises the pure equation layer on hand-sized numbers,
then plays a full episode against the environment with a naive seasonal
pricing rule and prints the year-one ledger month by month.
"""

import math

from gasmarket import (
    EpisodeTrace,
    GasMarketEnv,
    MarketParams,
    RewardWeights,
    compute_demand_supply,
    default_coefficients,
    inventory_transition,
    seasonal_value,
    update_bank,
    update_price_signals,
)

params = MarketParams()
weights = RewardWeights()
coefficients = default_coefficients()

print("== The equation layer ==")
print(f"admissible log prices: [{params.action_low:+.3f}, {params.action_high:+.3f}]"
      f"  (price levels {math.exp(params.action_low):.2f} to "
      f"{math.exp(params.action_high):.0f})")

# Price signals are sticky: posting price 2 for one month barely moves the
# demand side (lambda_d is high), while the supply side reacts faster.
p_d, p_s = update_price_signals(0.0, 0.0, 2.0, params)
print(f"posting P=2 into neutral signals: demand signal {p_d:.5f}, "
      f"supply signal {p_s:.5f}")

# Quantities respond to signals through the elasticities, plus seasonality
# and AR(1) shocks.  January demand sits near the seasonal peak.
january = seasonal_value(coefficients, 0)
d, s, excess = compute_demand_supply(january, p_d, p_s, 0.0, 0.0, params)
print(f"January: seasonal {january:+.4f}, log demand {d:+.4f}, "
      f"log supply {s:+.4f}, excess demand {excess:+.4f}")

# Storage absorbs the imbalance until it runs against a bound.
nxt, failed, severity = inventory_transition(1.5, excess, params.i_max)
print(f"inventory 1.50 absorbs excess {excess:+.4f} -> {nxt:.4f} "
      f"(failure: {failed})")
nxt, failed, severity = inventory_transition(0.1, 0.5, params.i_max)
print(f"inventory 0.10 cannot cover a draw of 0.50 -> {nxt:.1f}, "
      f"failure severity {severity:.2f}")

# The bank pays for injections, earns on withdrawals, accrues interest,
# and pays the storage fee.
bank = update_bank(10.0, 1.5, 1.2, 2.0, 1, params, p_d, p_s)
print(f"bank 10.00 after selling 0.3 units at P=2: {bank:.4f}")

print()
print("== A full episode under a seasonal pricing rule ==")
# Price high in winter (high seasonal demand), low in summer, which is
# roughly what a storage operator smoothing the cycle would do.
env = GasMarketEnv(params, weights, coefficients, seed=2024)
outcomes = []
while not env.done:
    month_index = len(outcomes) % 12
    action = 0.35 * seasonal_value(coefficients, month_index)
    outcomes.append(env.step(action))
trace = EpisodeTrace.from_outcomes(outcomes)

print(f"{'month':>5} {'price':>7} {'demand':>7} {'supply':>7} "
      f"{'inventory':>9} {'bank':>9} {'failed':>6}")
for i in range(12):
    print(f"{int(trace.month[i]):>5} {trace.price[i]:>7.3f} {trace.demand[i]:>7.3f} "
          f"{trace.supply[i]:>7.3f} {trace.inventory[i]:>9.3f} "
          f"{trace.bank[i]:>9.3f} {str(bool(trace.m[i])):>6}")

failures = int(trace.m.sum())
print(f"\nhorizon {len(trace.t)} months, {failures} market failures, "
      f"terminal bank {trace.bank[-1]:.2f}")
print("the un-learned rule keeps the market alive but leaves money on the "
      "table; training exists to do better.")

trace.to_csv("walkthrough_trace.csv")
print("full trace written to walkthrough_trace.csv")
