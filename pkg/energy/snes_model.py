"""
Aggregate decision model of the single-node storage problem.

A period's decision is reduced to the post-decision battery level
x^r_t; buying and selling follow from flow balance. Efficiency losses
are charged in money at the buying price.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

logger = logging.getLogger(__name__)

SCENARIO_EFFICIENCY = {
    "high": 0.05,
    "low": 0.3,
}

# Violation names reported by validate_decision
NONNEGATIVITY = "nonnegativity"
CAPACITY = "capacity"
INJECTION_RATE = "injection-rate"
WITHDRAWAL_RATE = "withdrawal-rate"
BALANCE = "balance"
BUY_XOR_SELL = "buy-xor-sell"
TERMINAL_INJECTION = "terminal-injection"


@dataclass(frozen=True)
class BatteryParams:
    r_max: int = 30
    gamma_inject: int = 6
    gamma_withdraw: int = 3
    hold_cost: float = 0.0005
    eta_inject: float = 0.05
    eta_withdraw: float = 0.05

    def __post_init__(self):
        if self.r_max < 1:
            raise DomainError(f"battery capacity must be positive, got {self.r_max}")
        if not 0 < self.gamma_inject <= self.r_max:
            raise DomainError(
                f"injection rate must lie in (0, {self.r_max}], got {self.gamma_inject}"
            )
        if not 0 < self.gamma_withdraw <= self.r_max:
            raise DomainError(
                f"withdrawal rate must lie in (0, {self.r_max}], got {self.gamma_withdraw}"
            )
        if self.hold_cost < 0:
            raise DomainError(f"holding cost must be nonnegative, got {self.hold_cost}")
        for name, eta in (("eta_inject", self.eta_inject), ("eta_withdraw", self.eta_withdraw)):
            if not 0.0 <= eta <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {eta}")

    @classmethod
    def for_scenario(cls, scenario, **overrides):
        try:
            eta = SCENARIO_EFFICIENCY[scenario]
        except KeyError:
            raise DomainError(f"unknown scenario '{scenario}'") from None
        values = {"eta_inject": eta, "eta_withdraw": eta}
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class Decision:
    """
    Sell / buy / store amounts for one period. ``store`` is the
    post-decision battery level. ``passthrough`` marks the naive
    policy's gross trade (sell all production, buy all demand).
    """

    sell: int
    buy: int
    store: int
    passthrough: bool = False


@dataclass(frozen=True)
class StageState:
    t: int
    prior_storage: int
    w: object

    def key(self):
        return (self.t, self.prior_storage) + self.w.as_tuple()


def feasible_storage_range(prior, params, is_terminal=False):
    """Closed interval [lo, hi] of reachable post-decision levels."""
    if not 0 <= prior <= params.r_max:
        raise DomainError(f"prior storage {prior} outside [0, {params.r_max}]")
    low = max(0, prior - params.gamma_withdraw)
    high = prior if is_terminal else min(params.r_max, prior + params.gamma_inject)
    return low, high


def compute_decisions(energy, demand, store, prior, t, horizon, params):
    """
    Derive (buy, sell) from the chosen storage level. Exactly one of
    them is positive unless net demand is met by the battery alone.
    """
    low, high = feasible_storage_range(prior, params, is_terminal=t == horizon)
    if not low <= store <= high:
        raise DomainError(
            f"storage level {store} infeasible from {prior} at t={t} (allowed [{low}, {high}])"
        )
    net = demand - energy + store - prior
    if net > 0:
        return net, 0
    return 0, -net


def stage_profit(d, prior, w, params):
    delta = d.store - prior
    loss = w.buy_price * (
        params.eta_inject * max(delta, 0) + params.eta_withdraw * max(-delta, 0)
    )
    return (
        w.sell_price * d.sell
        - w.buy_price * d.buy
        - params.hold_cost * d.store
        - loss
    )


def candidate_profits(state, params, horizon):
    """
    Every feasible storage level from ``state`` with its derived buy,
    sell and stage profit, as numpy arrays sorted by storage level.
    """
    w = state.w
    prior = state.prior_storage
    low, high = feasible_storage_range(prior, params, is_terminal=state.t == horizon)
    stores = np.arange(low, high + 1)
    net = w.demand - w.energy + stores - prior
    buys = np.maximum(net, 0)
    sells = np.maximum(-net, 0)
    delta = stores - prior
    loss = w.buy_price * (
        params.eta_inject * np.maximum(delta, 0) + params.eta_withdraw * np.maximum(-delta, 0)
    )
    profits = w.sell_price * sells - w.buy_price * buys - params.hold_cost * stores - loss
    return stores, buys, sells, profits


def naive_policy(state, params, horizon):
    """
    Pass-through policy: sell all production and buy all demand.
    In the last period the battery is drained as far as the
    withdrawal rate allows and the withdrawn energy is sold.
    """
    w = state.w
    prior = state.prior_storage
    if state.t < horizon:
        return Decision(sell=w.energy, buy=w.demand, store=prior, passthrough=True)
    withdrawn = min(params.gamma_withdraw, prior)
    return Decision(
        sell=w.energy + withdrawn,
        buy=w.demand,
        store=prior - withdrawn,
        passthrough=True,
    )


def validate_decision(d, state, params, horizon=None):
    """Return the list of violated constraints; empty means feasible."""
    w = state.w
    prior = state.prior_storage
    violations = []

    if d.sell < 0 or d.buy < 0 or d.store < 0:
        violations.append(NONNEGATIVITY)
    if d.store > params.r_max or not 0 <= prior <= params.r_max:
        violations.append(CAPACITY)
    if d.store - prior > params.gamma_inject:
        violations.append(INJECTION_RATE)
    if prior - d.store > params.gamma_withdraw:
        violations.append(WITHDRAWAL_RATE)
    if d.buy - d.store - d.sell != w.demand - w.energy - prior:
        violations.append(BALANCE)
    if d.buy > 0 and d.sell > 0 and not d.passthrough:
        violations.append(BUY_XOR_SELL)
    if horizon is not None and state.t == horizon and d.store > prior:
        violations.append(TERMINAL_INJECTION)

    return violations
