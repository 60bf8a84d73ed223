"""
Ground-truth solvers.

- solve_deterministic: hindsight optimum over (t, battery level), the
  same objective and constraints as the integer program used to score
  policies, solved as an exact DP.
- brute_force_deterministic: independent enumeration of storage paths.
- solve_exact_mdp: finite-horizon Bellman recursion over an explicitly
  enumerated Markov model of W.
- check_ip_feasibility: translates a solution into the integer program's
  (z, w, x) variables and checks every constraint.
"""
import logging
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, InstanceTooLargeError
from .snes_model import (
    Decision,
    StageState,
    candidate_profits,
    compute_decisions,
    feasible_storage_range,
    stage_profit,
)

logger = logging.getLogger(__name__)

INJECT_ACTIONS = ("buy-inject", "sell-inject", "inject")
WITHDRAW_ACTIONS = ("buy-withdraw", "sell-withdraw", "withdraw")
ACTIONS = INJECT_ACTIONS + WITHDRAW_ACTIONS + ("buy", "sell", "do-nothing")

BRUTE_FORCE_LIMIT = 10**6
MDP_SIZE_LIMIT = 10**6
MONEY_TOLERANCE = 1e-9

IpViolation = namedtuple("IpViolation", ["t", "constraint"])


def action_label(d, prior):
    delta = d.store - prior
    movement = "inject" if delta > 0 else "withdraw" if delta < 0 else None
    trade = "buy" if d.buy > 0 else "sell" if d.sell > 0 else None
    if movement and trade:
        return f"{trade}-{movement}"
    return movement or trade or "do-nothing"


@dataclass(frozen=True)
class DeterministicInstance:
    trajectory: tuple
    params: object
    initial_storage: int = 0

    def __post_init__(self):
        if len(self.trajectory) < 1:
            raise DomainError("instance trajectory is empty")
        if not 0 <= self.initial_storage <= self.params.r_max:
            raise DomainError(
                f"initial storage {self.initial_storage} outside [0, {self.params.r_max}]"
            )

    @property
    def horizon(self):
        return len(self.trajectory)


@dataclass(frozen=True)
class OracleSolution:
    revenue: float
    decisions: tuple
    action_labels: tuple


def _solution_from_path(inst, path):
    """Rebuild decisions, labels and the forward-summed revenue of a storage path."""
    horizon = inst.horizon
    prior = inst.initial_storage
    revenue = 0.0
    decisions = []
    labels = []
    for t, (w, store) in enumerate(zip(inst.trajectory, path), start=1):
        buy, sell = compute_decisions(w.energy, w.demand, store, prior, t, horizon, inst.params)
        d = Decision(sell=sell, buy=buy, store=store)
        revenue += stage_profit(d, prior, w, inst.params)
        decisions.append(d)
        labels.append(action_label(d, prior))
        prior = store
    return OracleSolution(revenue=revenue, decisions=tuple(decisions), action_labels=tuple(labels))


def solve_deterministic(inst):
    """
    V(t, r) = max over feasible r' of stage profit + V(t+1, r').
    Ties go to the smallest storage level.
    """
    horizon = inst.horizon
    params = inst.params
    levels = params.r_max + 1
    next_value = np.zeros(levels)
    choice = np.zeros((horizon, levels), dtype=int)

    for t in range(horizon, 0, -1):
        w = inst.trajectory[t - 1]
        value = np.empty(levels)
        for prior in range(levels):
            stores, _, _, profits = candidate_profits(StageState(t, prior, w), params, horizon)
            totals = profits + next_value[stores]
            best = int(np.argmax(totals))
            value[prior] = totals[best]
            choice[t - 1, prior] = stores[best]
        next_value = value

    path = []
    prior = inst.initial_storage
    for t in range(horizon):
        prior = int(choice[t, prior])
        path.append(prior)
    return _solution_from_path(inst, path)


def brute_force_deterministic(inst):
    """Enumerate every feasible storage path; exponential in the horizon."""
    params = inst.params
    horizon = inst.horizon
    if (params.r_max + 1) ** horizon > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(
            f"brute force refused: ({params.r_max}+1)^{horizon} paths exceed {BRUTE_FORCE_LIMIT}"
        )

    best_revenue = None
    best_path = None

    def walk(t, prior, revenue, path):
        nonlocal best_revenue, best_path
        if t > horizon:
            if best_revenue is None or revenue > best_revenue:
                best_revenue, best_path = revenue, list(path)
            return
        w = inst.trajectory[t - 1]
        low, high = feasible_storage_range(prior, params, is_terminal=t == horizon)
        for store in range(low, high + 1):
            buy, sell = compute_decisions(w.energy, w.demand, store, prior, t, horizon, params)
            profit = stage_profit(Decision(sell=sell, buy=buy, store=store), prior, w, params)
            path.append(store)
            walk(t + 1, store, revenue + profit, path)
            path.pop()

    walk(1, inst.initial_storage, 0.0, [])
    return _solution_from_path(inst, best_path)


@dataclass(frozen=True, eq=False)
class MarkovModel:
    """
    Enumerated exogenous process. ``transitions`` is either one
    stationary S x S matrix or a stack with one matrix per step t -> t+1.
    """

    states: tuple
    transitions: np.ndarray
    initial: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.states)
        matrices = np.asarray(self.transitions, dtype=float)
        if n == 0:
            raise DomainError("Markov model has no states")
        if matrices.ndim == 2:
            matrices = matrices[np.newaxis]
        if matrices.ndim != 3 or matrices.shape[1:] != (n, n):
            raise DomainError(f"transition shape {matrices.shape} does not match {n} states")
        if np.any(matrices < 0) or np.any(np.abs(matrices.sum(axis=2) - 1.0) > 1e-12):
            raise DomainError("transition rows must be nonnegative and sum to 1")
        object.__setattr__(self, "transitions", matrices)
        if self.initial is not None:
            initial = np.asarray(self.initial, dtype=float)
            if initial.shape != (n,) or abs(initial.sum() - 1.0) > 1e-12 or np.any(initial < 0):
                raise DomainError("initial distribution must be a probability vector over states")
            object.__setattr__(self, "initial", initial)

    @classmethod
    def from_trajectory(cls, trajectory):
        """Degenerate model that replays one trajectory with probability 1."""
        n = len(trajectory)
        stack = np.zeros((max(n - 1, 1), n, n))
        for step in range(n - 1):
            stack[step, :, step + 1] = 1.0
        if n == 1:
            stack[0, :, 0] = 1.0
        initial = np.zeros(n)
        initial[0] = 1.0
        return cls(states=tuple(trajectory), transitions=stack, initial=initial)

    def transition(self, t):
        """Matrix for the step t -> t+1."""
        if self.transitions.shape[0] == 1:
            return self.transitions[0]
        if t - 1 >= self.transitions.shape[0]:
            raise DomainError(f"no transition matrix for step {t} -> {t + 1}")
        return self.transitions[t - 1]


@dataclass(frozen=True, eq=False)
class ExactMdpSolution:
    values: np.ndarray  # (T, R_max + 1, S)
    policy: np.ndarray  # chosen post-decision level, same shape
    discount: float

    def value(self, t, prior, state_index):
        return float(self.values[t - 1, prior, state_index])

    def expected_value(self, model, prior):
        if model.initial is None:
            raise DomainError("model has no initial distribution")
        return float(model.initial @ self.values[0, prior, :])


def solve_exact_mdp(model, params, horizon, discount=1.0):
    n = len(model.states)
    levels = params.r_max + 1
    if n * levels * horizon > MDP_SIZE_LIMIT:
        raise InstanceTooLargeError(
            f"exact MDP refused: {n} states x {levels} levels x {horizon} periods"
        )
    if horizon > 1:
        model.transition(horizon - 1)

    values = np.zeros((horizon, levels, n))
    policy = np.zeros((horizon, levels, n), dtype=int)
    for t in range(horizon, 0, -1):
        if t == horizon:
            continuation = np.zeros((n, levels))
        else:
            # continuation[w, r'] = E[V_{t+1}(r', W') | W_t = w]
            continuation = model.transition(t) @ values[t].T
        for s, w in enumerate(model.states):
            for prior in range(levels):
                stores, _, _, profits = candidate_profits(StageState(t, prior, w), params, horizon)
                totals = profits + discount * continuation[s, stores]
                best = int(np.argmax(totals))
                values[t - 1, prior, s] = totals[best]
                policy[t - 1, prior, s] = stores[best]

    logger.info(f"Solved exact MDP with {n} exogenous states over {horizon} periods")
    return ExactMdpSolution(values=values, policy=policy, discount=discount)


def bellman_residual(solution, model, params):
    """Largest violation of the Bellman equation over all states."""
    horizon, levels, n = solution.values.shape
    worst = 0.0
    for t in range(1, horizon + 1):
        for s, w in enumerate(model.states):
            for prior in range(levels):
                stores, _, _, profits = candidate_profits(StageState(t, prior, w), params, horizon)
                if t < horizon:
                    expected = model.transition(t)[s] @ solution.values[t][stores].T
                    profits = profits + solution.discount * expected
                worst = max(worst, abs(profits.max() - solution.values[t - 1, prior, s]))
    return worst


def check_ip_feasibility(sol, inst):
    """
    Map the solution to the integer program's variables (one-hot action
    z, injection/withdrawal amounts w, quantities x) and return every
    violated constraint as (t, name). Labels may be a single name or a
    collection of names per period.
    """
    params = inst.params
    horizon = inst.horizon
    big_m = params.r_max
    violations = []

    def report(t, name):
        violations.append(IpViolation(t, name))

    if len(sol.decisions) != horizon or len(sol.action_labels) != horizon:
        report(0, "length")
        return violations

    prior = inst.initial_storage
    revenue = 0.0
    for t, (w, d, raw_labels) in enumerate(
        zip(inst.trajectory, sol.decisions, sol.action_labels), start=1
    ):
        labels = {raw_labels} if isinstance(raw_labels, str) else set(raw_labels)
        delta = d.store - prior
        n_inject = sum(1 for label in labels if label in INJECT_ACTIONS)
        n_withdraw = sum(1 for label in labels if label in WITHDRAW_ACTIONS)
        injected = max(delta, 0) if n_inject else 0
        withdrawn = max(-delta, 0) if n_withdraw else 0

        if not labels <= set(ACTIONS):
            report(t, "action-set")
        if len(labels) != 1:
            report(t, "one-action")
        if delta > params.gamma_inject * n_inject:
            report(t, "injection-limit")
        if -delta > params.gamma_withdraw * n_withdraw:
            report(t, "withdrawal-limit")
        if injected > big_m * n_inject or withdrawn > big_m * n_withdraw:
            report(t, "linking")
        if injected < delta:
            report(t, "injection-cover")
        if withdrawn < -delta:
            report(t, "withdrawal-cover")
        if d.buy - d.store - d.sell != w.demand - w.energy - prior:
            report(t, "balance")
        if not 0 <= d.store <= params.r_max:
            report(t, "capacity")
        if any(not isinstance(v, (int, np.integer)) or v < 0 for v in (d.buy, d.sell, d.store)):
            report(t, "integrality")
        if t == horizon and delta > 0:
            report(t, "terminal-injection")
        if len(labels) == 1 and labels != {action_label(d, prior)}:
            report(t, "label-consistency")

        revenue += stage_profit(d, prior, w, params)
        prior = d.store

    if abs(revenue - sol.revenue) > MONEY_TOLERANCE:
        report(horizon, "objective")
    return violations
