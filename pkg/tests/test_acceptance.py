"""Acceptance gate: one test per release criterion.

Criteria 1 through 6 run at desk scale in every checkout and carry their
own runtime budgets.  Criteria 7 through 10 retrain the complete
experiment pipeline (hours of CPU per policy); they are skipped unless
GASMARKET_FULL_SCALE=1 is exported, and cache their training runs under
GASMARKET_FULL_SCALE_ROOT (a temporary directory by default) so repeat
invocations only pay for the evaluations.

Loop-level contracts that need more than a second (budget arithmetic,
resume, CLI round trips, the sigma override no-op) are enforced in the
per-module suites; this file owns the numbered end-to-end claims.
"""

import json
import math
import os
import tempfile
import time
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from gasmarket import (
    AgentConfig,
    CheckpointEntry,
    EpisodeTrace,
    GasMarketEnv,
    MarketParams,
    MetricsReport,
    NetworkWeights,
    PriceSeries,
    ReplayBuffer,
    RewardWeights,
    RunSpec,
    SeasonalCoefficients,
    Transition,
    aggregate_seed_means,
    average_series,
    check_threshold,
    clip_log_price,
    compute_demand_supply,
    compute_reward,
    default_coefficients,
    deterministic_action,
    evaluate,
    evaluate_checkpoint,
    fit_coefficients,
    forward,
    generate_series,
    init_network,
    inventory_transition,
    kde,
    labeled_log_diffs,
    log_diffs,
    mean_ci,
    metrics_from_traces,
    price_series_from_trace,
    run_episode,
    sample_action,
    seasonal_regression,
    seasonal_value,
    select_best,
    sweep_sigma_s,
    train,
    update_bank,
    update_price_signals,
    update_shock,
    volatility_std,
)
from gasmarket.docio import decode_array, spawn_rng
from gasmarket.market_env import OBS_COS_PHASE, OBS_DIM, OBS_SIN_PHASE
from gasmarket.neuralnet import Gradients, adam_init, adam_step, backward, soft_update
from gasmarket.sac_agent import (
    ScalarAdam,
    TransitionBatch,
    actor_loss_and_grads,
    compute_critic_targets,
    critic_loss_and_grads,
    squash_log_prob,
    temperature_gradient,
)

TOL = 1e-12

FULL_SCALE = os.environ.get("GASMARKET_FULL_SCALE") == "1"
full_scale = pytest.mark.skipif(
    not FULL_SCALE,
    reason="export GASMARKET_FULL_SCALE=1 to retrain the complete pipeline")

# Seed for the desk-scale learning run of criterion 6.  Training is bit
# reproducible, so this pins the whole outcome; see the criterion test.
LEARNING_SEED = 1


def zero_actor(obs_dim: int = OBS_DIM) -> NetworkWeights:
    net = init_network([obs_dim, 4, 2], spawn_rng(999))
    for w, b in zip(net.weights, net.biases):
        w[...] = 0.0
        b[...] = 0.0
    return net


def constant_price_episode(params: MarketParams, weights: RewardWeights,
                           entropy: tuple) -> EpisodeTrace:
    return run_episode(zero_actor(), params, weights,
                       default_coefficients(), entropy)


def random_policy_episode(params: MarketParams, weights: RewardWeights,
                          env_entropy: tuple, action_entropy: tuple) -> EpisodeTrace:
    env = GasMarketEnv(params, weights, default_coefficients(), seed=env_entropy)
    rng = spawn_rng(*action_entropy)
    outcomes = []
    while not env.done:
        outcomes.append(env.step(rng.uniform(params.action_low, params.action_high)))
    return EpisodeTrace.from_outcomes(outcomes)


class TestCriterion1EquationExamples:
    """Closed-form checks of every arithmetic contract, at 1e-12."""

    def test_equation_examples(self):
        t0 = time.perf_counter()
        params = MarketParams()
        weights = RewardWeights()

        # Same seed, same action sequence: bit-identical trace.
        def play(seed):
            env = GasMarketEnv(params, weights, default_coefficients(), seed=seed)
            outcomes = []
            t = 0
            while not env.done:
                outcomes.append(env.step(0.2 * math.sin(t / 7.0)))
                t += 1
            return EpisodeTrace.from_outcomes(outcomes)

        assert play(7).to_csv_text() == play(7).to_csv_text()

        # The phase observation starts at angle zero.
        env = GasMarketEnv(params, weights, default_coefficients(), seed=7)
        obs0 = env.reset()
        assert obs0[OBS_COS_PHASE] == 1.0 and obs0[OBS_SIN_PHASE] == 0.0

        # Sticky price signals.
        p_d, _ = update_price_signals(0.0, 0.0, 1.0, params)
        assert abs(p_d) <= TOL
        free = replace(params, lambda_d=0.0)
        p_d, _ = update_price_signals(0.0, 0.0, 2.0, free)
        assert abs(p_d - math.log(2.0)) <= TOL
        p_d, _ = update_price_signals(0.0, 0.0, 2.0, params)
        assert abs(p_d - math.log(1.025)) <= TOL

        # AR(1) shocks.
        assert abs(update_shock(0.1, 0.98, 0.01, 0.0) - 0.098) <= TOL
        assert abs(update_shock(0.1, 0.0, 0.04, 1.0) - 0.04) <= TOL

        # Demand, supply, excess.
        d, s, excess = compute_demand_supply(0.0, 0.0, 0.0, 0.0, 0.0, params)
        assert d == 0.0 and s == 0.0 and excess == 0.0
        d, _, _ = compute_demand_supply(0.2, 0.5, 0.0, 0.01, 0.0, params)
        assert abs(d - 0.11) <= TOL
        _, s, _ = compute_demand_supply(0.0, 0.0, 1.0, 0.0, 0.0, params)
        assert abs(s - 0.3) <= TOL
        assert abs(math.exp(s) - math.exp(0.3)) <= TOL

        # Inventory transition branches.
        assert inventory_transition(1.5, 0.5, 3.0) == (1.0, False, 0.0)
        nxt, failed, sev = inventory_transition(1.0, 1.2, 3.0)
        assert nxt == 0.0 and failed and abs(sev - 0.2) <= TOL
        nxt, failed, sev = inventory_transition(2.8, -0.5, 3.0)
        assert nxt == 3.0 and failed and abs(sev - 0.3) <= TOL

        # Bank account.
        bank = update_bank(0.0, 1.0, 0.8, 1.0, 1, params, 0.0, 0.0)
        assert abs(bank - 0.195) <= TOL
        bank = update_bank(100.0, 0.0, 0.0, 1.0, 1, params, 0.0, 0.0)
        assert abs(bank - 100.25) <= TOL
        mid = update_bank(0.0, 2.0, 2.0, 1.0, params.horizon - 1, params, 0.0, 0.0)
        end = update_bank(0.0, 2.0, 2.0, 1.0, params.horizon, params, 0.0, 0.0)
        assert abs((end - mid) - 2.0) <= TOL

        # Reward terms.
        total, _ = compute_reward(1.0, 0.3, 0.3, False, 0.0, False, 0.0, weights)
        assert total == 1.0
        total, _ = compute_reward(0.0, 0.4, 0.3, False, 0.0, False, 0.0, weights)
        assert abs(total + 0.2) <= TOL
        total, _ = compute_reward(0.0, 0.3, 0.3, True, 0.2, False, 0.0, weights)
        assert abs(total + 1200.0) <= TOL

        # Price clipping and refill threshold.
        assert abs(clip_log_price(10.0, params) - math.log(100.0)) <= TOL
        missed, gap = check_threshold(2.0, 11, weights, i_max=3.0)
        assert missed and abs(gap - 0.49) <= TOL
        assert abs(params.action_low + math.log(100.0)) <= TOL
        assert abs(params.action_high - math.log(100.0)) <= TOL

        # Seasonal curve.
        zero = SeasonalCoefficients.zero()
        assert all(seasonal_value(zero, t) == 0.0 for t in range(24))
        first = SeasonalCoefficients((1,), np.array([1.0]), np.array([0.0]))
        assert abs(seasonal_value(first, 0) - 1.0) <= TOL
        assert abs(seasonal_value(first, 6) + 1.0) <= TOL
        rng = spawn_rng(41)
        coeffs = SeasonalCoefficients((1, 2, 3, 4, 6), rng.normal(size=5),
                                      np.append(rng.normal(size=4), 0.0))
        for t in range(12):
            assert abs(seasonal_value(coeffs, t + 12) - seasonal_value(coeffs, t)) <= TOL
        flat_fit = fit_coefficients([(m, 5.5) for m in range(24)])
        assert np.max(np.abs(flat_fit.a)) <= TOL
        assert np.max(np.abs(flat_fit.b)) <= TOL

        # Network forward and backward identities.
        net = zero_actor(obs_dim=3)
        assert np.all(forward(net, np.zeros(3)) == 0.0)
        affine = NetworkWeights([np.array([[2.0]])], [np.array([1.0])])
        assert forward(affine, np.array([3.0])) == np.array([7.0])
        grads, _ = backward(affine, np.array([3.0]), np.array([1.0]))
        assert grads.biases[0][0] == 1.0
        grads, _ = backward(affine, np.array([3.0]), np.array([0.0]))
        assert grads.weights[0][0, 0] == 0.0 and grads.biases[0][0] == 0.0

        # Adam fixed point and first-step magnitude.
        single = NetworkWeights([np.array([[0.5]])], [np.array([0.25])])
        opt = adam_init(single, lr=3e-4)
        frozen = adam_step(opt, single, Gradients([np.zeros((1, 1))], [np.zeros(1)]))
        assert frozen.weights[0][0, 0] == 0.5 and frozen.biases[0][0] == 0.25
        opt = adam_init(single, lr=3e-4)
        stepped = adam_step(opt, single,
                            Gradients([np.ones((1, 1))], [np.zeros(1)]))
        delta = 0.5 - stepped.weights[0][0, 0]
        assert abs(delta - opt.lr / (1.0 + opt.eps)) <= TOL

        # Polyak blending.
        def pair():
            return (NetworkWeights([np.zeros((1, 1))], [np.zeros(1)]),
                    NetworkWeights([np.ones((1, 1))], [np.ones(1)]))

        target, online = pair()
        assert soft_update(target, online, 1.0).weights[0][0, 0] == 1.0
        target, online = pair()
        assert soft_update(target, online, 0.0).weights[0][0, 0] == 0.0
        target, online = pair()
        assert abs(soft_update(target, online, 0.005).weights[0][0, 0] - 0.005) <= TOL

        # Squashed actions.
        lo, hi = params.action_low, params.action_high
        action, _, _, _ = squash_log_prob(np.zeros(1), np.zeros(1), np.zeros(1), lo, hi)
        assert abs(action[0]) <= TOL and abs(math.exp(action[0]) - 1.0) <= TOL
        near, _, _, _ = squash_log_prob(np.array([10.0]), np.zeros(1), np.zeros(1), lo, hi)
        nearer, _, _, _ = squash_log_prob(np.array([12.0]), np.zeros(1), np.zeros(1), lo, hi)
        assert near[0] < nearer[0] <= hi
        assert hi - near[0] < 1e-7

        actor = init_network([OBS_DIM, 4, 2], spawn_rng(42))
        obs = spawn_rng(43).normal(size=OBS_DIM)
        a_zero = deterministic_action(zero_actor(), obs, lo, hi)
        assert abs(a_zero) <= TOL and abs(math.exp(a_zero) - 1.0) <= TOL
        a_det = deterministic_action(actor, obs, lo, hi)
        assert a_det == deterministic_action(actor, obs, lo, hi)

        class _NoNoise:
            def standard_normal(self, n):
                return np.zeros(n)

        a_sampled, _ = sample_action(actor, obs, _NoNoise(), lo, hi)
        assert abs(a_sampled - a_det) <= TOL

        # Critic targets.
        config = AgentConfig.for_market(params, hidden=(4, 4), batch_size=4,
                                        warmup_steps=4, replay_capacity=8)
        rng = spawn_rng(44)
        batch = TransitionBatch(
            obs=rng.normal(size=(4, OBS_DIM)), actions=rng.normal(size=4),
            rewards=rng.normal(size=4), next_obs=rng.normal(size=(4, OBS_DIM)),
            dones=np.zeros(4))
        q1t = init_network([OBS_DIM + 1, 4, 1], spawn_rng(45))
        q2t = init_network([OBS_DIM + 1, 4, 1], spawn_rng(46))
        noise = spawn_rng(47).standard_normal(4)
        myopic = SimpleNamespace(gamma=0.0, action_low=lo, action_high=hi)
        targets = compute_critic_targets(batch, actor, q1t, q2t, -0.5, myopic, noise)
        assert np.array_equal(targets, batch.rewards)
        done_batch = replace(batch, dones=np.ones(4))
        targets = compute_critic_targets(batch=done_batch, actor=actor,
                                         q1_target=q1t, q2_target=q2t,
                                         log_alpha=-0.5, config=config, noise=noise)
        assert np.array_equal(targets, done_batch.rewards)

        # Flat objective: zero temperature and constant critics.
        flat_q = init_network([OBS_DIM + 1, 4, 1], spawn_rng(999))
        for w, b in zip(flat_q.weights, flat_q.biases):
            w[...] = 0.0
            b[...] = 0.0
        _, agrads = actor_loss_and_grads(actor, flat_q, flat_q,
                                         batch.obs, noise, -math.inf, config)
        flat_max = max(float(np.max(np.abs(g))) for g in agrads.weights + agrads.biases)
        assert flat_max <= TOL

        # Temperature stationarity, sign, and positivity.
        target_entropy = config.target_entropy
        at_target = np.full(6, -target_entropy)
        assert temperature_gradient(at_target, target_entropy) == 0.0
        below = at_target + 0.3
        assert temperature_gradient(below, target_entropy) < 0.0
        log_alpha = ScalarAdam(0.0, lr=3e-4)
        for _ in range(500):
            log_alpha.update(2.0)
        assert math.exp(log_alpha.value) > 0.0

        # Replay ring semantics and reproducible sampling.
        buffer = ReplayBuffer(capacity=2, obs_dim=3)
        for reward in (1.0, 2.0, 3.0):
            buffer.push(Transition(np.zeros(3), 0.0, reward, np.zeros(3), False))
        assert len(buffer) == 2
        stored = decode_array(buffer.to_doc()["rewards"])
        assert set(stored.tolist()) == {2.0, 3.0}
        drawn = buffer.sample(2, spawn_rng(48))
        again = buffer.sample(2, spawn_rng(48))
        assert np.array_equal(drawn.rewards, again.rewards)
        assert np.array_equal(drawn.obs, again.obs)

        # Metric aggregation on a noise-free market: every episode is the
        # same, so standard errors vanish and success is exact.
        quiet = replace(params, sigma_d=0.0, sigma_s=0.0)
        report, traces = evaluate(zero_actor(), quiet, weights,
                                  SeasonalCoefficients.zero(), n_episodes=2)
        assert report.success_rate.mean == 1.0
        assert all(getattr(report, name).se == 0.0
                   for name in ("total_reward", "terminal_bank", "success_rate",
                                "mean_sq_log_price_change", "mean_price"))
        assert traces[0].to_csv_text() == traces[1].to_csv_text()

        # Cross-seed aggregation.
        mean, se = aggregate_seed_means([5.0, 5.0, 5.0])
        assert mean == 5.0 and se == 0.0
        mean, _ = aggregate_seed_means([1.0, 3.0])
        assert mean == 2.0

        # Checkpoint selection.
        lone = CheckpointEntry(10_000, 1.5, "only.json")
        assert select_best([lone]) is lone
        rising = [CheckpointEntry(s, r, f"{s}.json")
                  for s, r in ((10_000, 1.0), (20_000, 2.0), (30_000, 3.0))]
        assert select_best(rising) is rising[-1]
        tied = [CheckpointEntry(10_000, 2.0, "a.json"),
                CheckpointEntry(20_000, 2.0, "b.json")]
        assert select_best(tied).step == 20_000

        # Price-series analysis identities.
        months = np.arange(60)
        flat = PriceSeries(months[:5], np.full(5, 2.7))
        assert np.all(log_diffs(flat) == 0.0)
        unit = PriceSeries(months[:2], np.array([1.0, math.e]))
        assert abs(log_diffs(unit)[0] - 1.0) <= TOL
        geometric = PriceSeries(months[:6], 1.1 ** np.arange(6))
        assert np.max(np.abs(log_diffs(geometric) - math.log(1.1))) <= TOL

        steady = PriceSeries(months[:37], np.exp(0.37 * np.arange(37)))
        diffs, labels = labeled_log_diffs(steady)
        est = seasonal_regression(diffs, labels)
        assert np.max(np.abs(est.coefficients - 0.37)) <= TOL
        rng = spawn_rng(49)
        noisy = rng.normal(size=36)
        est = seasonal_regression(noisy, np.tile(np.arange(1, 13), 3))
        for month in range(1, 13):
            chunk = noisy[np.tile(np.arange(1, 13), 3) == month]
            assert abs(est.coefficients[month - 1] - chunk.mean()) <= TOL

        assert volatility_std(np.full(8, 0.123)) == 0.0
        assert abs(volatility_std(np.array([-1.0, 1.0])) - math.sqrt(2.0)) <= TOL

        grid = np.linspace(-3.0, 3.0, 121)
        density = kde(np.array([-1.0, 1.0]), grid)
        assert np.max(np.abs(density - density[::-1])) <= TOL

        mean, half = mean_ci(np.full(9, 4.2))
        assert mean == 4.2 and half == 0.0
        mean, half = mean_ci(np.array([0.0, 2.0]))
        assert abs(mean - 1.0) <= TOL
        assert abs(half - 1.96 / math.sqrt(2.0)) <= TOL

        base = PriceSeries(months[:6], np.array([1.0, 2.0, 1.5, 3.0, 2.5, 2.0]))
        doubled = average_series([base, base])
        assert np.array_equal(doubled.prices, base.prices)
        ones = PriceSeries(months[:4], np.full(4, 1.0))
        threes = PriceSeries(months[:4], np.full(4, 3.0))
        assert np.all(average_series([ones, threes]).prices == 2.0)

        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0, f"equation suite took {elapsed:.2f}s"
        print(f"criterion 1 ok in {elapsed:.2f}s")


class TestCriterion2Determinism:
    def test_identical_runs_are_bit_identical(self, tmp_path):
        t0 = time.perf_counter()
        params = MarketParams()
        spec = RunSpec(
            params=params, weights=RewardWeights(),
            agent=AgentConfig.for_market(params, hidden=(32, 32), batch_size=64,
                                         warmup_steps=500),
            training_steps=10_000, checkpoint_interval=5_000, seed=11,
            tag="determinism", checkpoint_eval_episodes=1, final_eval_episodes=2)
        train(spec, str(tmp_path / "a"))
        train(spec, str(tmp_path / "b"))

        def manifest(root):
            out = {}
            for path in sorted(Path(root).rglob("*")):
                if path.is_file() and path.name != "meta.json":
                    out[str(path.relative_to(root))] = path.read_bytes()
            return out

        first, second = manifest(tmp_path / "a"), manifest(tmp_path / "b")
        assert first.keys() == second.keys()
        mismatched = [name for name in first if first[name] != second[name]]
        assert mismatched == []
        elapsed = time.perf_counter() - t0
        assert elapsed < 120.0, f"determinism pair took {elapsed:.1f}s"
        print(f"criterion 2 ok in {elapsed:.1f}s")


def fd_check(loss_fn, arrays, grads, rel, h=1e-6):
    """Central finite differences over every element of every array."""
    for arr, grad in zip(arrays, grads):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_fn()
            arr[idx] = old - h
            down = loss_fn()
            arr[idx] = old
            fd = (up - down) / (2.0 * h)
            scale = max(abs(fd), abs(grad[idx]), 1e-6)
            assert abs(fd - grad[idx]) <= rel * scale, (idx, grad[idx], fd)


class TestCriterion3Gradients:
    def test_losses_match_finite_differences(self):
        t0 = time.perf_counter()
        params = MarketParams()
        config = AgentConfig.for_market(params, hidden=(4,), batch_size=4,
                                        warmup_steps=4, replay_capacity=8)
        rng = spawn_rng(300)
        actor = init_network([OBS_DIM, 4, 2], spawn_rng(301))
        q1 = init_network([OBS_DIM + 1, 4, 1], spawn_rng(302))
        q2 = init_network([OBS_DIM + 1, 4, 1], spawn_rng(303))
        obs = rng.normal(size=(5, OBS_DIM))
        actions = rng.normal(size=5)
        targets = rng.normal(size=5)
        noise = rng.standard_normal(5)

        # Plain layers: quadratic loss through a rectified stack.
        plain = init_network([3, 4, 2], spawn_rng(304))
        x = rng.normal(size=(6, 3))

        def plain_loss():
            return 0.5 * float(np.sum(forward(plain, x) ** 2))

        out = forward(plain, x)
        plain_grads, _ = backward(plain, x, out)
        fd_check(plain_loss, plain.weights + plain.biases,
                 plain_grads.weights + plain_grads.biases, 1e-4)

        # Twin-critic regression loss.
        _, g1, g2 = critic_loss_and_grads(q1, q2, obs, actions, targets)

        def critic_loss():
            return critic_loss_and_grads(q1, q2, obs, actions, targets)[0]

        fd_check(critic_loss, q1.weights + q1.biases, g1.weights + g1.biases, 1e-3)
        fd_check(critic_loss, q2.weights + q2.biases, g2.weights + g2.biases, 1e-3)

        # Reparameterized policy loss.
        _, agrads = actor_loss_and_grads(actor, q1, q2, obs, noise, -0.7, config)

        def actor_loss():
            return actor_loss_and_grads(actor, q1, q2, obs, noise, -0.7, config)[0]

        fd_check(actor_loss, actor.weights + actor.biases,
                 agrads.weights + agrads.biases, 1e-3)

        # Temperature objective J(log alpha) = mean(-log_alpha (log pi + H*)).
        log_prob = rng.normal(size=8)
        target_entropy = config.target_entropy
        h = 1e-6

        def temp_loss(log_alpha):
            return float(np.mean(-log_alpha * (log_prob + target_entropy)))

        fd = (temp_loss(0.3 + h) - temp_loss(0.3 - h)) / (2.0 * h)
        analytic = temperature_gradient(log_prob, target_entropy)
        assert abs(fd - analytic) <= 1e-3 * max(abs(fd), abs(analytic), 1e-6)

        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"gradient suite took {elapsed:.1f}s"
        print(f"criterion 3 ok in {elapsed:.1f}s")


class TestCriterion4ShockStationarity:
    def test_empirical_std_matches_closed_form(self):
        t0 = time.perf_counter()
        for stream, (rho, sigma) in enumerate(((0.98, 0.01), (0.75, 0.04))):
            draws = spawn_rng(400, stream).standard_normal(1_000_000)
            series = np.empty(draws.size)
            shock = 0.0
            for i, eps in enumerate(draws.tolist()):
                shock = update_shock(shock, rho, sigma, eps)
                series[i] = shock
            target = sigma / math.sqrt(1.0 - rho * rho)
            assert abs(series.std() - target) <= 0.03 * target, (rho, sigma)
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"stationarity suite took {elapsed:.1f}s"
        print(f"criterion 4 ok in {elapsed:.1f}s")


class TestCriterion5SeasonalityMachinery:
    def test_fit_round_trip_and_regression_recovery(self):
        coeffs = SeasonalCoefficients(
            (1, 2, 3, 4, 6),
            np.array([0.30, -0.12, 0.07, 0.04, 0.02]),
            np.array([0.25, -0.08, 0.05, -0.03, 0.0]))
        fitted = fit_coefficients(generate_series(coeffs, range(24)))
        assert fitted.harmonics == coeffs.harmonics
        assert np.max(np.abs(fitted.a - coeffs.a)) <= 1e-10
        assert np.max(np.abs(fitted.b - coeffs.b)) <= 1e-10

        pattern = np.array([0.4, -0.1, 0.0, 0.2, -0.3, 0.05,
                            0.15, -0.25, 0.1, 0.0, 0.35, -0.05])
        labels = np.tile(np.arange(1, 13), 3)
        estimate = seasonal_regression(pattern[labels - 1], labels)
        assert np.max(np.abs(estimate.coefficients - pattern)) <= 1e-10
        assert np.max(np.abs(estimate.standard_errors)) <= 1e-10
        print("criterion 5 ok")


class TestCriterion6LearningSignal:
    def test_trained_policy_beats_baselines(self, tmp_path):
        t0 = time.perf_counter()
        params = MarketParams()
        weights = RewardWeights()
        spec = RunSpec(
            params=params, weights=weights,
            agent=AgentConfig.for_market(params),
            training_steps=50_000, checkpoint_interval=10_000,
            seed=LEARNING_SEED, tag="learning",
            checkpoint_eval_episodes=2, final_eval_episodes=2)
        result = train(spec, str(tmp_path / "learning"))
        best = select_best(result.checkpoints)
        report, _ = evaluate_checkpoint(best.path, 20, seed=0)

        # Both baselines face the exact evaluation episodes the policy saw.
        const_traces = [constant_price_episode(params, weights, (0, 2, i))
                        for i in range(20)]
        rand_traces = [random_policy_episode(params, weights, (0, 2, i), (0, 4, i))
                       for i in range(20)]
        const_report = metrics_from_traces(const_traces, params, weights)
        rand_report = metrics_from_traces(rand_traces, params, weights)

        agent_lo = report.total_reward.mean - 1.96 * report.total_reward.se
        const_hi = const_report.total_reward.mean + 1.96 * const_report.total_reward.se
        rand_hi = rand_report.total_reward.mean + 1.96 * rand_report.total_reward.se
        assert agent_lo > const_hi, (agent_lo, const_hi)
        assert agent_lo > rand_hi, (agent_lo, rand_hi)
        assert report.success_rate.mean >= 0.99, (
            f"trained policy success rate {report.success_rate.mean:.4f} "
            f"(se {report.success_rate.se:.4f}) after {spec.training_steps} "
            f"steps; reward clauses passed (agent lower bound {agent_lo:.0f} "
            f"vs constant {const_hi:.0f} and random {rand_hi:.0f})")

        elapsed = time.perf_counter() - t0
        assert elapsed <= 1800.0, f"learning run took {elapsed:.0f}s"
        print(f"criterion 6 ok in {elapsed:.0f}s: success "
              f"{report.success_rate.mean:.4f}, reward {report.total_reward.mean:.0f}")


# --- Full-scale reproduction ------------------------------------------------

def _full_scale_root() -> Path:
    root = os.environ.get("GASMARKET_FULL_SCALE_ROOT",
                          os.path.join(tempfile.gettempdir(), "gasmarket-full-scale"))
    return Path(root)


def _ensure_trained(tag: str, weights: RewardWeights) -> Path:
    """Train a full-length policy once and reuse it on later invocations."""
    params = MarketParams()
    spec = RunSpec(
        params=params, weights=weights, agent=AgentConfig.for_market(params),
        training_steps=1_500_000, checkpoint_interval=100_000, seed=0, tag=tag,
        checkpoint_eval_episodes=3, final_eval_episodes=50)
    run_dir = _full_scale_root() / tag
    if not (run_dir / "metrics.json").exists():
        train(spec, str(run_dir))
    return run_dir


@pytest.fixture(scope="session")
def baseline_run() -> Path:
    return _ensure_trained("full-baseline", RewardWeights(threshold_miss=0.0))


@pytest.fixture(scope="session")
def regulated_run() -> Path:
    return _ensure_trained("full-regulated", RewardWeights(threshold_miss=1000.0))


def _final_report(run_dir: Path) -> MetricsReport:
    with open(run_dir / "metrics.json", "r", encoding="utf-8") as fh:
        return MetricsReport.from_doc(json.load(fh))


def _final_traces(run_dir: Path) -> list[EpisodeTrace]:
    paths = sorted((run_dir / "traces").glob("trace_*.csv"))
    return [EpisodeTrace.from_csv(str(p)) for p in paths]


def _best_checkpoint(run_dir: Path) -> str:
    rows = []
    with open(run_dir / "training_log.csv", "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            step_text, reward_text = line.strip().split(",")
            path = run_dir / "checkpoints" / f"step_{int(step_text):08d}.json"
            rows.append(CheckpointEntry(int(step_text), float(reward_text), str(path)))
    return select_best(rows).path


@full_scale
class TestCriterion7RefillInventory:
    def test_unregulated_policy_parks_near_three_quarters(self, baseline_run):
        report = _final_report(baseline_run)
        fraction = report.refill_month_inventory.mean / MarketParams().i_max
        assert 0.63 <= fraction <= 0.83, fraction
        print(f"criterion 7 ok: refill-month inventory fraction {fraction:.3f}")


@full_scale
class TestCriterion8PriceVolatility:
    def test_pooled_log_diff_std_in_band(self, baseline_run):
        traces = _final_traces(baseline_run)
        assert len(traces) == 50
        pooled = np.concatenate(
            [log_diffs(price_series_from_trace(t)) for t in traces])
        std = volatility_std(pooled)
        assert 0.17 <= std <= 0.37, std
        print(f"criterion 8 ok: pooled volatility {std:.3f}")


@full_scale
class TestCriterion9SeasonalPeak:
    def test_averaged_price_peaks_in_november(self, baseline_run):
        series = [price_series_from_trace(t) for t in _final_traces(baseline_run)]
        averaged = average_series(series)
        diffs, labels = labeled_log_diffs(averaged)
        estimate = seasonal_regression(diffs, labels)
        peak_month = int(np.argmax(estimate.coefficients)) + 1
        assert peak_month == 11, estimate.coefficients
        print("criterion 9 ok: seasonal peak in month 11")


@full_scale
class TestCriterion10RegulationTradeoff:
    def test_regulated_policy_is_more_robust_but_less_profitable(
            self, baseline_run, regulated_run):
        sweep = sweep_sigma_s(_best_checkpoint(baseline_run),
                              _best_checkpoint(regulated_run),
                              [0.07], n_episodes=1000)
        base, reg = sweep.baseline[0], sweep.regulated[0]
        reg_lo = reg.success_rate.mean - 1.96 * reg.success_rate.se
        base_hi = base.success_rate.mean + 1.96 * base.success_rate.se
        assert reg.success_rate.mean >= base.success_rate.mean
        assert reg_lo > base_hi, (reg_lo, base_hi)
        assert reg.terminal_bank.mean < base.terminal_bank.mean
        print(f"criterion 10 ok: success {reg.success_rate.mean:.4f} vs "
              f"{base.success_rate.mean:.4f}, bank {reg.terminal_bank.mean:.0f} vs "
              f"{base.terminal_bank.mean:.0f}")
