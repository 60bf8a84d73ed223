import itertools

import numpy as np

from energy.snes_model import (
    BatteryParams,
    Decision,
    compute_decisions,
    feasible_storage_range,
    stage_profit,
)
from energy.stochastic import ExogenousState


class ScriptedRng:
    """Stands in for a numpy Generator and replays fixed draws."""

    def __init__(self, normals=(), uniforms=(), integers=()):
        self.normals = list(normals)
        self.uniforms = list(uniforms)
        self.ints = list(integers)

    def normal(self, loc=0.0, scale=1.0):
        return self.normals.pop(0)

    def random(self, size=None):
        return self.uniforms.pop(0)

    def integers(self, low, high=None):
        return self.ints.pop(0)


def random_state(rng):
    buy = int(rng.integers(3, 14))
    sell = min(int(rng.integers(2, 13)), buy)
    return ExogenousState(
        energy=int(rng.integers(1, 8)),
        demand=int(rng.integers(1, 16)),
        buy_price=buy,
        sell_price=sell,
    )


def random_trajectory(rng, horizon):
    return tuple(random_state(rng) for _ in range(horizon))


def tiny_params(rng, scenario):
    r_max = int(rng.integers(2, 5))
    return BatteryParams.for_scenario(scenario, r_max=r_max, gamma_inject=2, gamma_withdraw=2)


def policy_tree_values(model, params, horizon, t, prior, s):
    """
    Expected revenue of every deterministic history-dependent policy
    from (t, prior, state index s), by explicit enumeration.
    """
    w = model.states[s]
    low, high = feasible_storage_range(prior, params, is_terminal=t == horizon)
    values = []
    for store in range(low, high + 1):
        buy, sell = compute_decisions(w.energy, w.demand, store, prior, t, horizon, params)
        profit = stage_profit(Decision(sell=sell, buy=buy, store=store), prior, w, params)
        if t == horizon:
            values.append(profit)
            continue
        probs = model.transition(t)[s]
        subtrees = [
            policy_tree_values(model, params, horizon, t + 1, store, nxt)
            for nxt in range(len(model.states))
        ]
        for combo in itertools.product(*subtrees):
            values.append(profit + sum(p * v for p, v in zip(probs, combo)))
    return values


def tail_sums(profits):
    tails = [0.0] * len(profits)
    for t in range(len(profits) - 2, -1, -1):
        tails[t] = tails[t + 1] + profits[t + 1]
    return np.array(tails)
