import numpy as np
from django.test import SimpleTestCase

from energy.apinn import (
    ONLINE_GREEDY,
    TABLE,
    ApinnConfig,
    EvaluationDataset,
    PolicyTable,
    RoundDiagnostics,
    apply_policy,
    evaluate_policy,
    explore_decision,
    fit_value_function,
    greedy_decisions,
    improve_policy,
    rollout,
    run_apinn,
    training_mode,
)
from energy.bench import DATA_CLASSES, process_config
from energy.exceptions import DomainError, InfeasibleDecisionError
from energy.oracle import DeterministicInstance, solve_deterministic
from energy.regress import LinearModel, predict
from energy.snes_model import BatteryParams, Decision, StageState, naive_policy, validate_decision
from energy.stochastic import ExogenousState, sample_trajectory
from energy.streams import Streams, derive

from .utils import random_trajectory, tail_sums

HIGH = BatteryParams.for_scenario("high")


def small_config(**overrides):
    values = dict(
        n_trajectories=20,
        levels=(0, 3),
        architecture="ols",
        improvement_samples=5,
        rounds=1,
        seed=17,
        process=process_config(DATA_CLASSES["S12"]),
        battery=HIGH,
        exploration=0.0,
    )
    values.update(overrides)
    return ApinnConfig(**values)


class ApinnConfigTests(SimpleTestCase):
    def test_process_horizon_follows_config(self):
        cfg = small_config(horizon=6)
        self.assertEqual(cfg.process.horizon, 6)

    def test_invalid_values(self):
        with self.assertRaises(DomainError):
            small_config(levels=(0, 31))
        with self.assertRaises(DomainError):
            small_config(levels=())
        with self.assertRaises(DomainError):
            small_config(architecture="forest")
        with self.assertRaises(DomainError):
            small_config(apply_mode="lookup")
        with self.assertRaises(DomainError):
            small_config(n_trajectories=0)


class EvaluationTests(SimpleTestCase):
    def test_naive_zero_noise_labels_are_tail_sums(self):
        cfg = small_config(
            n_trajectories=1,
            levels=(0,),
            process=process_config(DATA_CLASSES["S3"]).without_noise(),
        )
        streams = Streams(cfg.seed)
        dataset = evaluate_policy(PolicyTable(), cfg, streams)

        trajectory = sample_trajectory(cfg.process, derive(cfg.seed, "evaluate", 0, 0))
        expected = rollout(PolicyTable(), trajectory, 0, HIGH)
        np.testing.assert_allclose(dataset.labels, tail_sums(expected.profits), atol=1e-12)
        np.testing.assert_allclose(dataset.profits, expected.profits, atol=1e-12)
        self.assertEqual(dataset.fallbacks, 10)
        self.assertAlmostEqual(dataset.mean_revenue, expected.revenue, delta=1e-12)

    def test_dataset_shape_and_telescoping_labels(self):
        cfg = small_config(n_trajectories=2, levels=(0, 5))
        dataset = evaluate_policy(PolicyTable(), cfg, Streams(cfg.seed))
        self.assertEqual(dataset.size, 2 * 2 * 10)
        self.assertEqual(dataset.features.shape, (40, 5))
        labels = dataset.labels.reshape(4, 10)
        profits = dataset.profits.reshape(4, 10)
        np.testing.assert_array_equal(labels[:, -1], 0.0)
        np.testing.assert_allclose(labels[:, :-1] - labels[:, 1:], profits[:, 1:], atol=1e-9)
        np.testing.assert_array_equal(dataset.trajectory_ids, np.repeat(np.arange(4), 10))
        np.testing.assert_array_equal(dataset.features[:10, 0], np.arange(1, 11))

    def test_every_round_sees_the_same_trajectories(self):
        cfg = small_config(n_trajectories=3)
        streams = Streams(cfg.seed)
        first = evaluate_policy(PolicyTable(), cfg, streams)
        second = evaluate_policy(PolicyTable(), cfg, streams)
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_worker_processes_do_not_change_results(self):
        serial = evaluate_policy(PolicyTable(), small_config(n_trajectories=4), Streams(17))
        parallel = evaluate_policy(PolicyTable(), small_config(n_trajectories=4, jobs=2), Streams(17))
        np.testing.assert_array_equal(serial.features, parallel.features)
        np.testing.assert_array_equal(serial.labels, parallel.labels)


class RolloutTests(SimpleTestCase):
    def setUp(self):
        self.trajectory = random_trajectory(np.random.default_rng(8), 10)

    def test_empty_table_is_the_naive_policy(self):
        result = rollout(PolicyTable(), self.trajectory, 4, HIGH)
        prior = 4
        for t, (w, d) in enumerate(zip(self.trajectory, result.decisions), start=1):
            self.assertEqual(d, naive_policy(StageState(t, prior, w), HIGH, 10))
            prior = d.store
        self.assertEqual(result.fallbacks, 10)

    def test_infeasible_table_entry_raises(self):
        w = self.trajectory[0]
        bad = Decision(sell=0, buy=w.demand - w.energy + 7, store=7)
        table = PolicyTable(entries={StageState(1, 0, w).key(): bad})
        with self.assertRaises(InfeasibleDecisionError) as ctx:
            rollout(table, self.trajectory, 0, HIGH)
        self.assertIn("injection-rate", ctx.exception.violations)

    def test_replayed_oracle_table_reproduces_the_optimum(self):
        for seed in range(10):
            trajectory = random_trajectory(np.random.default_rng(100 + seed), 10)
            optimum = solve_deterministic(DeterministicInstance(trajectory, HIGH))
            entries = {}
            prior = 0
            for t, (w, d) in enumerate(zip(trajectory, optimum.decisions), start=1):
                entries[StageState(t, prior, w).key()] = d
                prior = d.store
            revenue, decisions = apply_policy(PolicyTable(entries=entries), trajectory, 0, HIGH)
            self.assertAlmostEqual(revenue, optimum.revenue, delta=1e-9)
            self.assertEqual(decisions, optimum.decisions)

    def test_no_policy_beats_hindsight(self):
        model = LinearModel(intercept=0.0, coef=np.array([0.0, 0.0, 0.0, 0.0, 2.0]))
        online = PolicyTable(model=model)
        for seed in range(20):
            trajectory = random_trajectory(np.random.default_rng(200 + seed), 10)
            bound = solve_deterministic(DeterministicInstance(trajectory, HIGH)).revenue
            naive, _ = apply_policy(PolicyTable(), trajectory, 0, HIGH)
            greedy, _ = apply_policy(online, trajectory, 0, HIGH, ONLINE_GREEDY)
            self.assertLessEqual(naive, bound + 1e-6)
            self.assertLessEqual(greedy, bound + 1e-6)


class GreedyTests(SimpleTestCase):
    def test_without_a_model_the_choice_is_myopic(self):
        state = StageState(2, 0, ExogenousState(energy=6, demand=2, buy_price=10, sell_price=5))
        (d,) = greedy_decisions(None, [state], HIGH, 10)
        self.assertEqual((d.sell, d.buy, d.store), (4, 0, 0))

    def test_valuable_storage_injects_at_the_rate_limit(self):
        states = [StageState(t, 0, ExogenousState(3, 3, 10, 6)) for t in range(1, 10)]
        for d in greedy_decisions(lambda f: 1000.0 * f[:, 4], states, HIGH, 10):
            self.assertEqual(d.store, 6)

    def test_last_period_never_injects(self):
        rng = np.random.default_rng(9)
        states = [StageState(10, int(rng.integers(0, 31)), w) for w in random_trajectory(rng, 40)]
        for state, d in zip(states, greedy_decisions(lambda f: 1000.0 * f[:, 4], states, HIGH, 10)):
            self.assertLessEqual(d.store, state.prior_storage)

    def test_constant_shift_does_not_change_decisions(self):
        rng = np.random.default_rng(10)
        states = [StageState(int(rng.integers(1, 10)), int(rng.integers(0, 31)), w)
                  for w in random_trajectory(rng, 50)]
        model = LinearModel(intercept=0.0, coef=np.array([0.1, -0.2, 0.3, 0.4, 1.5]))
        shifted = LinearModel(intercept=123.0, coef=model.coef)
        self.assertEqual(
            greedy_decisions(model, states, HIGH, 10),
            greedy_decisions(shifted, states, HIGH, 10),
        )


class FitAndImproveTests(SimpleTestCase):
    def _dataset(self, labels_of):
        rng = np.random.default_rng(12)
        features = rng.integers(0, 20, size=(500, 5)).astype(float)
        return EvaluationDataset(
            features=features,
            labels=labels_of(features),
            profits=np.zeros(500),
            trajectory_ids=np.repeat(np.arange(50), 10),
            revenues=np.zeros(50),
        )

    def test_zero_labels_give_a_zero_model(self):
        cfg = small_config(architecture="nn")
        dataset = self._dataset(lambda f: np.zeros(len(f)))
        model, _ = fit_value_function(dataset, cfg, Streams(1))
        self.assertLess(float(np.max(np.abs(predict(model, dataset.features)))), 0.1)

    def test_least_squares_recovers_linear_labels(self):
        coef = np.array([1.0, -0.5, 0.25, 2.0, 3.0])
        dataset = self._dataset(lambda f: 7.0 + f @ coef)
        model, report = fit_value_function(dataset, small_config(), Streams(1))
        np.testing.assert_allclose(model.coef, coef, atol=1e-8)
        self.assertLess(report.validation_loss, 1e-12)

    def test_empty_dataset(self):
        empty = EvaluationDataset(np.zeros((0, 5)), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
        with self.assertRaises(DomainError):
            fit_value_function(empty, small_config(), Streams(1))

    def test_improved_table_follows_the_greedy_policy(self):
        cfg = small_config(improvement_samples=4)
        model = LinearModel(intercept=0.0, coef=np.array([0.0, 0.0, 0.0, 0.0, 1.0]))
        table = improve_policy(model, cfg, Streams(cfg.seed), round_index=2)
        self.assertEqual(table.generation, 3)
        self.assertIs(table.model, model)
        self.assertGreater(len(table), 0)
        self.assertLessEqual(len(table), len(cfg.levels) * 4 * cfg.horizon)
        for key, d in table.entries.items():
            state = StageState(key[0], key[1], ExogenousState(*key[2:]))
            self.assertEqual(greedy_decisions(model, [state], HIGH, cfg.horizon), [d])
            if key[0] == 1:
                self.assertIn(key[1], cfg.levels)

    def test_improvement_states_are_reached_by_the_greedy_policy(self):
        cfg = small_config(improvement_samples=3)
        table = improve_policy(lambda f: 1000.0 * f[:, 4], cfg, Streams(cfg.seed))
        reached = {
            (t, min(level + 6 * (t - 1), 30))
            for level in cfg.levels
            for t in range(1, cfg.horizon + 1)
        }
        self.assertEqual({key[:2] for key in table.entries}, reached)


class ExplorationTests(SimpleTestCase):
    def test_draws_span_the_feasible_range(self):
        state = StageState(2, 10, ExogenousState(3, 3, 10, 6))
        self.assertEqual(explore_decision(state, HIGH, 10, 0.0).store, 7)
        self.assertEqual(explore_decision(state, HIGH, 10, 0.999).store, 16)
        terminal = StageState(10, 10, ExogenousState(3, 3, 10, 6))
        self.assertEqual(explore_decision(terminal, HIGH, 10, 0.999).store, 10)

    def test_explored_decisions_keep_flow_balance(self):
        rng = np.random.default_rng(4)
        for w in random_trajectory(rng, 100):
            state = StageState(int(rng.integers(1, 11)), int(rng.integers(0, 31)), w)
            d = explore_decision(state, HIGH, 10, float(rng.random()))
            self.assertEqual(validate_decision(d, state, HIGH, 10), [])

    def test_labels_telescope_along_explored_rollouts(self):
        cfg = small_config(n_trajectories=3, exploration=0.5)
        dataset = evaluate_policy(PolicyTable(), cfg, Streams(cfg.seed))
        labels = dataset.labels.reshape(6, 10)
        profits = dataset.profits.reshape(6, 10)
        np.testing.assert_array_equal(labels[:, -1], 0.0)
        np.testing.assert_allclose(labels[:, :-1] - labels[:, 1:], profits[:, 1:], atol=1e-9)

    def test_revenue_is_measured_without_exploration(self):
        clean = evaluate_policy(PolicyTable(), small_config(n_trajectories=3), Streams(17))
        explored = evaluate_policy(
            PolicyTable(), small_config(n_trajectories=3, exploration=0.5), Streams(17)
        )
        np.testing.assert_array_equal(clean.revenues, explored.revenues)
        self.assertEqual(clean.fallbacks, explored.fallbacks)
        self.assertFalse(np.array_equal(clean.features, explored.features))

    def test_exploration_must_be_below_one(self):
        for rate in (-0.1, 1.0):
            with self.assertRaises(DomainError):
                small_config(exploration=rate)


class TrainingModeTests(SimpleTestCase):
    def test_table_until_a_model_exists(self):
        cfg = small_config()
        self.assertEqual(training_mode(PolicyTable(), cfg), TABLE)
        self.assertEqual(training_mode(PolicyTable(model=lambda f: f[:, 4]), cfg), ONLINE_GREEDY)
        self.assertEqual(
            training_mode(PolicyTable(model=lambda f: f[:, 4]), small_config(apply_mode=TABLE)),
            TABLE,
        )

    def test_online_evaluation_has_no_fallbacks(self):
        policy = PolicyTable(model=lambda f: 1000.0 * f[:, 4], generation=1)
        dataset = evaluate_policy(policy, small_config(n_trajectories=2), Streams(17))
        self.assertEqual(dataset.fallbacks, 0)
        stores = dataset.features[:, 4].reshape(4, 10)
        np.testing.assert_array_equal(stores[:2, 0], 6)


class RunApinnTests(SimpleTestCase):
    def test_single_round_reports_training_and_final_evaluation(self):
        seen = []
        result = run_apinn(small_config(), on_round=seen.append)
        self.assertEqual(len(result.diagnostics), 2)
        self.assertEqual(list(result.diagnostics), seen)
        first, final = result.diagnostics
        self.assertIsInstance(first, RoundDiagnostics)
        self.assertEqual((first.round, first.generation, first.dataset_size), (1, 0, 400))
        self.assertEqual(first.fallbacks, 400)
        self.assertIsNotNone(first.validation_loss)
        self.assertEqual((final.round, final.generation), (2, 1))
        self.assertIsNone(final.train_loss)
        self.assertEqual(result.policy.generation, 1)

    def test_keeps_the_best_trained_generation(self):
        result = run_apinn(small_config(rounds=2))
        revenues = [diag.mean_revenue for diag in result.diagnostics[1:]]
        self.assertEqual(result.policy.generation, 1 + int(np.argmax(revenues)))
        self.assertIs(result.model, result.policy.model)

    def test_last_generation_without_selection(self):
        result = run_apinn(small_config(rounds=2, keep_best=False))
        self.assertEqual(result.policy.generation, 2)

    def test_same_seed_same_result(self):
        first = run_apinn(small_config(rounds=2))
        second = run_apinn(small_config(rounds=2))
        self.assertEqual(first.diagnostics, second.diagnostics)
        self.assertEqual(first.policy.entries, second.policy.entries)
