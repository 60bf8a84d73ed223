"""
Approximate policy iteration.

Each round simulates the current policy from every initial battery
level, fits a value model on (features -> realized value-to-go), and
rebuilds the policy table by enumerating the feasible storage levels of
the states the improved policy reaches. The first policy is the naive
pass-through policy.

Training rollouts replace a share of the decisions by random feasible
storage levels; revenues are always measured without exploration.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError, InfeasibleDecisionError
from .regress import ARCHITECTURES, SvrParams, TrainConfig, fit_model, predict
from .snes_model import (
    BatteryParams,
    Decision,
    StageState,
    candidate_profits,
    compute_decisions,
    feasible_storage_range,
    naive_policy,
    stage_profit,
    validate_decision,
)
from .stochastic import ProcessConfig, sample_trajectory
from .streams import Streams, derive

logger = logging.getLogger(__name__)

TABLE = "table"
ONLINE_GREEDY = "online_greedy"
APPLY_MODES = (TABLE, ONLINE_GREEDY)


@dataclass(frozen=True)
class ApinnConfig:
    n_trajectories: int = 3000
    horizon: int = 10
    rounds: int = 10
    levels: tuple = tuple(range(10))
    architecture: str = "nn"
    improvement_samples: int = 200
    seed: int = 0
    apply_mode: str = ONLINE_GREEDY
    # Share of training decisions replaced by a random feasible level
    exploration: float = 0.2
    # Return the trained generation with the best simulated revenue
    keep_best: bool = True
    jobs: int = 1
    process: ProcessConfig = field(default_factory=ProcessConfig)
    battery: BatteryParams = field(default_factory=BatteryParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    svr: SvrParams = field(default_factory=SvrParams)

    def __post_init__(self):
        for name in ("n_trajectories", "horizon", "rounds", "improvement_samples", "jobs"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.levels:
            raise DomainError("at least one initial battery level is required")
        for level in self.levels:
            if not 0 <= level <= self.battery.r_max:
                raise DomainError(f"initial level {level} outside [0, {self.battery.r_max}]")
        if self.architecture not in ARCHITECTURES:
            raise DomainError(f"unknown architecture '{self.architecture}'")
        if self.apply_mode not in APPLY_MODES:
            raise DomainError(f"unknown apply mode '{self.apply_mode}'")
        if not 0.0 <= self.exploration < 1.0:
            raise DomainError(f"exploration must lie in [0, 1), got {self.exploration}")
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.process.horizon != self.horizon:
            object.__setattr__(self, "process", replace(self.process, horizon=self.horizon))


@dataclass
class PolicyTable:
    """
    Sampled-state lookup (t, prior, E, D, C, P) -> Decision. States that
    were never sampled fall back to the naive policy in table mode; the
    value model of the round that built the table drives online mode.
    """

    entries: dict = field(default_factory=dict)
    generation: int = 0
    model: object = None

    def __len__(self):
        return len(self.entries)

    def decide(self, state, params, horizon, mode=TABLE):
        """Return (decision, True when no fallback was needed)."""
        (d,), hits = self.decide_all([state], params, horizon, mode)
        return d, hits == 1

    def decide_all(self, states, params, horizon, mode=TABLE):
        """Decisions for a batch of states and the number of table hits."""
        if mode == ONLINE_GREEDY:
            return greedy_decisions(self.model, states, params, horizon), len(states)
        decisions = []
        hits = 0
        for state in states:
            d = self.entries.get(state.key())
            if d is None:
                d = naive_policy(state, params, horizon)
            else:
                hits += 1
            decisions.append(d)
        return decisions, hits


@dataclass(frozen=True)
class Rollout:
    revenue: float
    states: tuple
    decisions: tuple
    profits: tuple
    fallbacks: int


@dataclass(frozen=True, eq=False)
class EvaluationDataset:
    """
    One row per simulated period, trajectory-major with t ascending.
    ``labels`` hold the realized profit of periods t+1..T. ``revenues``
    and ``fallbacks`` describe the policy without exploration.
    """

    features: np.ndarray
    labels: np.ndarray
    profits: np.ndarray
    trajectory_ids: np.ndarray
    revenues: np.ndarray
    fallbacks: int = 0

    @property
    def size(self):
        return len(self.labels)

    @property
    def mean_revenue(self):
        return float(self.revenues.mean()) if len(self.revenues) else 0.0


@dataclass(frozen=True)
class RoundDiagnostics:
    round: int
    generation: int
    dataset_size: int
    train_loss: float = None
    validation_loss: float = None
    mean_revenue: float = 0.0
    fallbacks: int = 0


@dataclass(frozen=True)
class ApinnResult:
    policy: PolicyTable
    diagnostics: tuple
    model: object = None


def _predict_values(model, features):
    if model is None:
        return np.zeros(len(features))
    if callable(model):
        return np.asarray(model(features), dtype=float)
    return np.asarray(predict(model, features), dtype=float)


def greedy_decisions(model, states, params, horizon):
    """
    For each state pick the storage level maximizing stage profit plus
    predicted value-to-go; the first (smallest) level wins ties. The
    last period has no future, so only the stage profit counts there.
    """
    blocks = [candidate_profits(s, params, horizon) for s in states]
    features = np.concatenate([
        np.column_stack([
            np.full(len(stores), s.t),
            np.full(len(stores), s.prior_storage),
            buys,
            sells,
            stores,
        ])
        for s, (stores, buys, sells, _) in zip(states, blocks)
    ]).astype(float)
    values = _predict_values(model, features)

    decisions = []
    start = 0
    for s, (stores, buys, sells, profits) in zip(states, blocks):
        stop = start + len(stores)
        totals = profits if s.t == horizon else profits + values[start:stop]
        best = int(np.argmax(totals))
        decisions.append(Decision(sell=int(sells[best]), buy=int(buys[best]), store=int(stores[best])))
        start = stop
    return decisions


def explore_decision(state, params, horizon, draw):
    """Feasible decision at the storage level picked by ``draw`` in [0, 1)."""
    low, high = feasible_storage_range(state.prior_storage, params, is_terminal=state.t == horizon)
    store = low + min(int(draw * (high - low + 1)), high - low)
    w = state.w
    buy, sell = compute_decisions(
        w.energy, w.demand, store, state.prior_storage, state.t, horizon, params
    )
    return Decision(sell=sell, buy=buy, store=store)


def rollout_all(policy, trajectories, initial_storage, params, mode=TABLE, explore=None):
    """
    Apply the policy to equally long trajectories in lockstep, period t
    only seeing W_1..W_t. ``explore`` is an optional (rate, uniforms,
    draws) triple of arrays shaped (trajectories, T): where the uniform
    falls below the rate the decision is replaced by explore_decision.
    Returns one Rollout per trajectory; fallbacks count policy decisions
    only.
    """
    n = len(trajectories)
    horizon = len(trajectories[0]) if n else 0
    priors = [initial_storage] * n
    states = [[] for _ in range(n)]
    decisions = [[] for _ in range(n)]
    profits = [[] for _ in range(n)]
    fallbacks = [0] * n

    for t in range(1, horizon + 1):
        step = [StageState(t, priors[i], trajectory[t - 1]) for i, trajectory in enumerate(trajectories)]
        chosen, _ = policy.decide_all(step, params, horizon, mode)
        for i, (state, d) in enumerate(zip(step, chosen)):
            violations = validate_decision(d, state, params, horizon)
            if violations:
                raise InfeasibleDecisionError(state.key(), violations)
            if explore is not None and explore[1][i, t - 1] < explore[0]:
                d = explore_decision(state, params, horizon, explore[2][i, t - 1])
            elif mode == TABLE and state.key() not in policy.entries:
                fallbacks[i] += 1
            states[i].append(state)
            decisions[i].append(d)
            profits[i].append(stage_profit(d, state.prior_storage, state.w, params))
            priors[i] = d.store

    return [
        Rollout(
            revenue=float(sum(profits[i])),
            states=tuple(states[i]),
            decisions=tuple(decisions[i]),
            profits=tuple(profits[i]),
            fallbacks=fallbacks[i],
        )
        for i in range(n)
    ]


def rollout(policy, trajectory, initial_storage, params, mode=TABLE):
    """Apply the policy causally: period t only sees W_1..W_t."""
    return rollout_all(policy, [trajectory], initial_storage, params, mode)[0]


def apply_policy(policy, trajectory, initial_storage, params, mode=TABLE):
    result = rollout(policy, trajectory, initial_storage, params, mode)
    return result.revenue, result.decisions


def training_mode(policy, cfg):
    # Without a value model only the table (naive fallback) can decide.
    return cfg.apply_mode if policy.model is not None else TABLE


def _simulate_level(policy, cfg, seed, level):
    """Simulate M trajectories from one initial level (one work item)."""
    horizon = cfg.horizon
    trajectories = [
        sample_trajectory(cfg.process, derive(seed, "evaluate", level, m))
        for m in range(cfg.n_trajectories)
    ]
    mode = training_mode(policy, cfg)
    measured = rollout_all(policy, trajectories, level, cfg.battery, mode)
    if cfg.exploration > 0:
        rng = derive(seed, "explore", level)
        shape = (len(trajectories), horizon)
        explore = (cfg.exploration, rng.random(shape), rng.random(shape))
        sampled = rollout_all(policy, trajectories, level, cfg.battery, mode, explore)
    else:
        sampled = measured

    features, labels, profits = [], [], []
    for result in sampled:
        tails = [0.0] * horizon
        for t in range(horizon - 2, -1, -1):
            tails[t] = tails[t + 1] + result.profits[t + 1]
        for state, d, tail in zip(result.states, result.decisions, tails):
            features.append((state.t, state.prior_storage, d.buy, d.sell, d.store))
            labels.append(tail)
        profits.extend(result.profits)
    revenues = [r.revenue for r in measured]
    fallbacks = sum(r.fallbacks for r in measured)
    return features, labels, profits, revenues, fallbacks


def evaluate_policy(policy, cfg, streams):
    """
    Simulate the policy M times from every initial level. Every round
    draws the same exogenous trajectories and exploration draws, so
    revenue differences between rounds come from the policy alone.
    """
    if cfg.jobs > 1 and len(cfg.levels) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(
                _simulate_level,
                [policy] * len(cfg.levels),
                [cfg] * len(cfg.levels),
                [streams.seed] * len(cfg.levels),
                cfg.levels,
            ))
    else:
        chunks = [_simulate_level(policy, cfg, streams.seed, level) for level in cfg.levels]

    features, labels, profits, revenues = [], [], [], []
    fallbacks = 0
    for f, lab, p, rev, fb in chunks:
        features.extend(f)
        labels.extend(lab)
        profits.extend(p)
        revenues.extend(rev)
        fallbacks += fb
    n_traj = len(revenues)
    return EvaluationDataset(
        features=np.asarray(features, dtype=float).reshape(-1, 5),
        labels=np.asarray(labels, dtype=float),
        profits=np.asarray(profits, dtype=float),
        trajectory_ids=np.repeat(np.arange(n_traj), cfg.horizon),
        revenues=np.asarray(revenues, dtype=float),
        fallbacks=fallbacks,
    )


def fit_value_function(dataset, cfg, streams, round_index=0, architecture=None):
    if dataset.size == 0:
        raise DomainError("cannot fit a value function on an empty dataset")
    train_seed = int(streams.get("fit", round_index).integers(2**31))
    return fit_model(
        architecture or cfg.architecture,
        dataset.features,
        dataset.labels,
        replace(cfg.train, seed=train_seed),
        cfg.svr,
    )


def improve_policy(model, cfg, streams, round_index=0):
    """
    Sample K exogenous trajectories per initial level, roll the greedy
    policy of ``model`` forward along them and store its decision for
    every (t, prior, W_t) it visits.
    """
    greedy = PolicyTable(model=model)
    entries = {}
    for level in cfg.levels:
        trajectories = [
            sample_trajectory(cfg.process, streams.get("improve", round_index, level, k))
            for k in range(cfg.improvement_samples)
        ]
        for result in rollout_all(greedy, trajectories, level, cfg.battery, ONLINE_GREEDY):
            for state, d in zip(result.states, result.decisions):
                entries[state.key()] = d
    return PolicyTable(entries=entries, generation=round_index + 1, model=model)


def run_apinn(cfg, streams=None, on_round=None):
    """
    N rounds of evaluate -> fit -> improve from the naive policy. A
    final evaluation of the last policy is appended to the diagnostics
    (without losses). ``on_round`` receives each RoundDiagnostics.

    With ``cfg.keep_best`` the returned policy is the improved
    generation with the highest mean simulated revenue; the earliest
    wins ties.
    """
    streams = streams or Streams(cfg.seed)
    policy = PolicyTable(generation=0)
    generations = []
    diagnostics = []

    def emit(diag):
        diagnostics.append(diag)
        logger.info(
            f"round {diag.round}: policy gen {diag.generation}, {diag.dataset_size} rows, "
            f"train loss {diag.train_loss}, val loss {diag.validation_loss}, "
            f"mean revenue {diag.mean_revenue:.3f}, fallbacks {diag.fallbacks}"
        )
        if on_round is not None:
            on_round(diag)

    for n in range(cfg.rounds):
        dataset = evaluate_policy(policy, cfg, streams)
        if policy.generation:
            generations.append((dataset.mean_revenue, policy))
        model, report = fit_value_function(dataset, cfg, streams, n)
        emit(RoundDiagnostics(
            round=n + 1,
            generation=policy.generation,
            dataset_size=dataset.size,
            train_loss=report.train_loss,
            validation_loss=report.validation_loss,
            mean_revenue=dataset.mean_revenue,
            fallbacks=dataset.fallbacks,
        ))
        policy = improve_policy(model, cfg, streams, n)

    final = evaluate_policy(policy, cfg, streams)
    generations.append((final.mean_revenue, policy))
    emit(RoundDiagnostics(
        round=cfg.rounds + 1,
        generation=policy.generation,
        dataset_size=final.size,
        mean_revenue=final.mean_revenue,
        fallbacks=final.fallbacks,
    ))

    if cfg.keep_best:
        best_revenue, policy = max(generations, key=lambda item: item[0])
        if policy.generation != cfg.rounds:
            logger.info(f"Keeping policy gen {policy.generation} (mean revenue {best_revenue:.3f})")
    return ApinnResult(policy=policy, diagnostics=tuple(diagnostics), model=policy.model)
