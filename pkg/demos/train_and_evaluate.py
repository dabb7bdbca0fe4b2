"""Train a small operator policy end to end and inspect what it learned.

Run it from the repository root:

    python3 demos/train_and_evaluate.py

The run takes about a minute thanks to a short market horizon and a small
network.  The full-size configuration is just ``MarketParams()`` and
``AgentConfig.for_market(params)`` with the training step count turned up.
"""

import os
import tempfile

import numpy as np

from gasmarket import (
    OBS_DIM,
    AgentConfig,
    MarketParams,
    RewardWeights,
    RunSpec,
    evaluate,
    evaluate_checkpoint,
    init_network,
    select_best,
    train,
)
from gasmarket.docio import spawn_rng
from gasmarket.svgplot import LineSeries, line_chart, save_svg

params = MarketParams(horizon=120)
weights = RewardWeights()
agent_config = AgentConfig.for_market(
    params,
    hidden=(32, 32),
    batch_size=64,
    warmup_steps=300,
    replay_capacity=50_000,
)
spec = RunSpec(
    params=params,
    weights=weights,
    agent=agent_config,
    training_steps=30_000,
    checkpoint_interval=5_000,
    seed=0,
    tag="demo",
    checkpoint_eval_episodes=2,
    final_eval_episodes=4,
)

run_dir = os.path.join(tempfile.mkdtemp(prefix="gasmarket-demo-"), spec.tag)
print(f"training {spec.training_steps} steps into {run_dir}")
result = train(spec, run_dir)

print("\ncheckpoint evaluations during training:")
for step, reward in result.log_rows:
    print(f"  step {step:>5}: mean episode reward {reward:>12.1f}")

best = select_best(result.checkpoints)
print(f"\nbest checkpoint by evaluation reward: step {best.step}")

# Score the selected policy on fresh evaluation episodes, against an
# untrained network of the same shape as a floor.
report, traces = evaluate_checkpoint(best.path, n_episodes=10, seed=123)
untrained = init_network([OBS_DIM, 32, 32, 2], spawn_rng(0))
floor_report, _ = evaluate(untrained, params, weights, None,
                           n_episodes=10, seed=123)

print(f"\ntrained policy over {report.n_episodes} fresh episodes:")
print(f"  success rate    {report.success_rate.mean:.3f} "
      f"(se {report.success_rate.se:.3f})")
print(f"  episode reward  {report.total_reward.mean:>12.1f} "
      f"(se {report.total_reward.se:.1f})")
print(f"  terminal bank   {report.terminal_bank.mean:>12.2f}")
print(f"untrained network, same episodes:")
print(f"  success rate    {floor_report.success_rate.mean:.3f}")
print(f"  episode reward  {floor_report.total_reward.mean:>12.1f}")

# The learning curve, straight from the training log.
steps = np.asarray([s for s, _ in result.log_rows], dtype=np.float64)
rewards = np.asarray([r for _, r in result.log_rows])
svg = line_chart(
    [LineSeries(steps, rewards, label="checkpoint eval reward")],
    title="Learning curve (demo scale)",
    x_label="training step",
    y_label="mean episode reward",
)
save_svg("demo_learning_curve.svg", svg)
print("\nlearning curve written to demo_learning_curve.svg")

# Inventory management is the visible skill: plot the first evaluated
# episode's inventory path against the storage bounds.
trace = traces[0]
months = np.arange(1.0, len(trace) + 1.0)
svg = line_chart(
    [
        LineSeries(months, trace.inventory, label="inventory"),
        LineSeries(months, np.full_like(months, params.i_max), label="capacity"),
    ],
    title="Inventory path of the trained policy",
    x_label="month",
    y_label="stored volume",
)
save_svg("demo_inventory_path.svg", svg)
print("inventory path written to demo_inventory_path.svg")
