from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from energy.exceptions import DomainError, InstanceTooLargeError
from energy.oracle import (
    ACTIONS,
    DeterministicInstance,
    IpViolation,
    MarkovModel,
    OracleSolution,
    action_label,
    bellman_residual,
    brute_force_deterministic,
    check_ip_feasibility,
    solve_deterministic,
    solve_exact_mdp,
)
from energy.snes_model import BatteryParams, Decision, StageState, candidate_profits, stage_profit
from energy.stochastic import ExogenousState

from .utils import policy_tree_values, random_trajectory, tiny_params

HIGH = BatteryParams.for_scenario("high")


class ActionLabelTests(SimpleTestCase):
    def test_labels(self):
        self.assertEqual(action_label(Decision(sell=0, buy=4, store=3), 0), "buy-inject")
        self.assertEqual(action_label(Decision(sell=2, buy=0, store=1), 3), "sell-withdraw")
        self.assertEqual(action_label(Decision(sell=0, buy=0, store=2), 0), "inject")
        self.assertEqual(action_label(Decision(sell=5, buy=0, store=3), 3), "sell")
        self.assertEqual(action_label(Decision(sell=0, buy=0, store=3), 3), "do-nothing")

    def test_every_label_is_an_action(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            prior = int(rng.integers(0, 10))
            store = int(rng.integers(0, 10))
            d = Decision(sell=int(rng.integers(0, 2)) * 3, buy=0, store=store)
            self.assertIn(action_label(d, prior), ACTIONS)


class DeterministicOracleTests(SimpleTestCase):
    def test_dynamic_program_matches_brute_force(self):
        rng = np.random.default_rng(20240)
        for case in range(200):
            scenario = "high" if case % 2 else "low"
            params = tiny_params(rng, scenario)
            horizon = int(rng.integers(1, 5))
            inst = DeterministicInstance(
                trajectory=random_trajectory(rng, horizon),
                params=params,
                initial_storage=int(rng.integers(0, params.r_max + 1)),
            )
            dp = solve_deterministic(inst)
            brute = brute_force_deterministic(inst)
            self.assertAlmostEqual(dp.revenue, brute.revenue, delta=1e-9, msg=f"case {case}")
            self.assertEqual(check_ip_feasibility(dp, inst), [], f"case {case}")
            self.assertEqual(check_ip_feasibility(brute, inst), [], f"case {case}")

    def test_no_profitable_trade(self):
        trajectory = (ExogenousState(energy=4, demand=4, buy_price=13, sell_price=2),) * 3
        for solve in (solve_deterministic, brute_force_deterministic):
            sol = solve(DeterministicInstance(trajectory, HIGH))
            self.assertEqual(sol.revenue, 0.0)
            self.assertEqual(set(sol.action_labels), {"do-nothing"})

    def test_single_period_sells_the_surplus(self):
        inst = DeterministicInstance((ExogenousState(energy=5, demand=2, buy_price=13, sell_price=12),), HIGH)
        for solve in (solve_deterministic, brute_force_deterministic):
            sol = solve(inst)
            self.assertEqual(sol.revenue, 36.0)
            self.assertEqual((sol.decisions[0].sell, sol.decisions[0].store), (3, 0))

    def test_store_cheap_sell_dear(self):
        trajectory = (
            ExogenousState(energy=7, demand=1, buy_price=3, sell_price=2),
            ExogenousState(energy=1, demand=1, buy_price=13, sell_price=12),
        )
        sol = solve_deterministic(DeterministicInstance(trajectory, HIGH))
        self.assertEqual([d.store for d in sol.decisions], [3, 0])
        self.assertEqual(sol.action_labels, ("sell-inject", "sell-withdraw"))
        self.assertAlmostEqual(sol.revenue, 39.5985, delta=1e-9)

    def test_decisions_never_buy_and_sell(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            inst = DeterministicInstance(random_trajectory(rng, 10), HIGH)
            for d in solve_deterministic(inst).decisions:
                self.assertEqual(d.buy * d.sell, 0)

    def test_revenue_monotone_in_capacity_efficiency_and_holding_cost(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            trajectory = random_trajectory(rng, 6)
            base = BatteryParams.for_scenario("low", r_max=4, gamma_inject=2, gamma_withdraw=2)
            revenue = solve_deterministic(DeterministicInstance(trajectory, base)).revenue
            bigger = solve_deterministic(
                DeterministicInstance(trajectory, replace(base, r_max=8))
            ).revenue
            lossier = solve_deterministic(
                DeterministicInstance(trajectory, replace(base, eta_inject=0.6, eta_withdraw=0.6))
            ).revenue
            costlier = solve_deterministic(
                DeterministicInstance(trajectory, replace(base, hold_cost=0.5))
            ).revenue
            self.assertGreaterEqual(bigger, revenue - 1e-9)
            self.assertLessEqual(lossier, revenue + 1e-9)
            self.assertLessEqual(costlier, revenue + 1e-9)

    def test_brute_force_refuses_large_instances(self):
        rng = np.random.default_rng(1)
        inst = DeterministicInstance(random_trajectory(rng, 10), HIGH)
        with self.assertRaises(InstanceTooLargeError):
            brute_force_deterministic(inst)

    def test_invalid_instances(self):
        with self.assertRaises(DomainError):
            DeterministicInstance((), HIGH)
        with self.assertRaises(DomainError):
            DeterministicInstance((ExogenousState(1, 1, 3, 2),), HIGH, initial_storage=31)


class IpFeasibilityTests(SimpleTestCase):
    def setUp(self):
        self.trajectory = (ExogenousState(3, 3, 10, 6), ExogenousState(3, 3, 10, 6))
        self.inst = DeterministicInstance(self.trajectory, HIGH)

    def _solution(self, decisions, labels):
        prior = 0
        revenue = 0.0
        for w, d in zip(self.trajectory, decisions):
            revenue += stage_profit(d, prior, w, HIGH)
            prior = d.store
        return OracleSolution(revenue=revenue, decisions=tuple(decisions), action_labels=tuple(labels))

    def test_two_labels_in_one_period(self):
        sol = self._solution(
            [Decision(0, 0, 0), Decision(0, 0, 0)],
            [("buy", "sell"), "do-nothing"],
        )
        self.assertEqual(check_ip_feasibility(sol, self.inst), [IpViolation(1, "one-action")])

    def test_injection_above_rate(self):
        sol = self._solution(
            [Decision(sell=0, buy=7, store=7), Decision(0, 0, 7)],
            ["buy-inject", "do-nothing"],
        )
        self.assertEqual(check_ip_feasibility(sol, self.inst), [IpViolation(1, "injection-limit")])

    def test_wrong_label_and_revenue(self):
        sol = self._solution(
            [Decision(sell=0, buy=2, store=2), Decision(sell=2, buy=0, store=0)],
            ["buy-inject", "sell-withdraw"],
        )
        self.assertEqual(check_ip_feasibility(sol, self.inst), [])
        tampered = replace(sol, revenue=sol.revenue + 1.0, action_labels=("buy", "sell-withdraw"))
        found = {v.constraint for v in check_ip_feasibility(tampered, self.inst)}
        self.assertIn("objective", found)
        self.assertIn("injection-limit", found)

    def test_terminal_injection_is_reported(self):
        sol = self._solution(
            [Decision(0, 0, 0), Decision(sell=0, buy=1, store=1)],
            ["do-nothing", "buy-inject"],
        )
        self.assertEqual(check_ip_feasibility(sol, self.inst), [IpViolation(2, "terminal-injection")])


class ExactMdpTests(SimpleTestCase):
    def setUp(self):
        self.model = MarkovModel(
            states=(ExogenousState(4, 1, 5, 3), ExogenousState(1, 5, 12, 11)),
            transitions=np.array([[0.7, 0.3], [0.4, 0.6]]),
            initial=np.array([0.5, 0.5]),
        )
        self.params = BatteryParams.for_scenario("high", r_max=2, gamma_inject=2, gamma_withdraw=2)

    def test_matches_enumeration_of_all_policies(self):
        sol = solve_exact_mdp(self.model, self.params, horizon=3)
        for prior in range(3):
            for s in range(2):
                best = max(policy_tree_values(self.model, self.params, 3, 1, prior, s))
                self.assertAlmostEqual(sol.value(1, prior, s), best, delta=1e-9)

    def test_bellman_residual_is_zero(self):
        sol = solve_exact_mdp(self.model, self.params, horizon=3)
        self.assertLessEqual(bellman_residual(sol, self.model, self.params), 1e-9)

    def test_expected_value_uses_initial_distribution(self):
        sol = solve_exact_mdp(self.model, self.params, horizon=3)
        expected = 0.5 * sol.value(1, 0, 0) + 0.5 * sol.value(1, 0, 1)
        self.assertAlmostEqual(sol.expected_value(self.model, 0), expected, delta=1e-12)

    def test_zero_discount_is_myopic(self):
        sol = solve_exact_mdp(self.model, self.params, horizon=3, discount=0.0)
        for t in (1, 2, 3):
            for prior in range(3):
                for s, w in enumerate(self.model.states):
                    _, _, _, profits = candidate_profits(StageState(t, prior, w), self.params, 3)
                    self.assertAlmostEqual(sol.value(t, prior, s), profits.max(), delta=1e-12)

    def test_degenerate_chain_reproduces_hindsight_optimum(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            trajectory = random_trajectory(rng, 6)
            model = MarkovModel.from_trajectory(trajectory)
            sol = solve_exact_mdp(model, HIGH, horizon=6)
            hindsight = solve_deterministic(DeterministicInstance(trajectory, HIGH))
            self.assertAlmostEqual(sol.value(1, 0, 0), hindsight.revenue, delta=1e-9)

    def test_invalid_models(self):
        with self.assertRaises(DomainError):
            MarkovModel(states=(ExogenousState(1, 1, 3, 2),), transitions=np.array([[0.5]]))
        with self.assertRaises(DomainError):
            MarkovModel(
                states=(ExogenousState(1, 1, 3, 2), ExogenousState(2, 2, 3, 2)),
                transitions=np.eye(3),
            )

    def test_refuses_oversized_models(self):
        with self.assertRaises(InstanceTooLargeError):
            solve_exact_mdp(self.model, HIGH, horizon=20_000)
