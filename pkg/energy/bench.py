"""
Benchmark harness: the S1-S13 data classes, instance generation, scoring
policies against the hindsight optimum and per-class summaries.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import formats
from .apinn import ONLINE_GREEDY, apply_policy
from .exceptions import DomainError, HindsightViolation
from .oracle import DeterministicInstance, solve_deterministic
from .stochastic import (
    DiscreteUniform,
    DiscretizedGaussian,
    PriceProcessKind,
    PriceVariant,
    ProcessConfig,
    sample_trajectory,
)
from .streams import derive

logger = logging.getLogger(__name__)

HINDSIGHT_TOLERANCE = 1e-6
DEFAULT_THRESHOLD = 80.0
SCENARIOS = ("high", "low")
ENERGY_RADIUS = 5
PRICE_RADIUS = 8


@dataclass(frozen=True)
class DataClassSpec:
    class_id: str
    energy_noise: object
    price_variant: PriceVariant
    price_sigma: float

    @property
    def index(self):
        return int(self.class_id[1:])


def _pn(sigma):
    return DiscretizedGaussian(sigma=sigma, radius=ENERGY_RADIUS)


_UNIFORM = DiscreteUniform(radius=1)
_JUMP = PriceVariant.MARKOV_CHAIN_WITH_JUMPS
_PLAIN = PriceVariant.MARKOV_CHAIN

DATA_CLASSES = {
    spec.class_id: spec
    for spec in (
        DataClassSpec("S1", _UNIFORM, _JUMP, 0.5),
        DataClassSpec("S2", _UNIFORM, _JUMP, 1.0),
        DataClassSpec("S3", _UNIFORM, _JUMP, 2.5),
        DataClassSpec("S4", _UNIFORM, _JUMP, 5.0),
        DataClassSpec("S5", _pn(0.5), _JUMP, 5.0),
        DataClassSpec("S6", _pn(1.0), _JUMP, 5.0),
        DataClassSpec("S7", _pn(1.5), _JUMP, 5.0),
        DataClassSpec("S8", _pn(2.0), _JUMP, 5.0),
        DataClassSpec("S9", _pn(0.5), _JUMP, 1.0),
        DataClassSpec("S10", _pn(1.0), _JUMP, 1.0),
        DataClassSpec("S11", _pn(1.5), _JUMP, 1.0),
        DataClassSpec("S12", _pn(0.5), _PLAIN, 1.0),
        DataClassSpec("S13", _pn(1.0), _PLAIN, 1.0),
    )
}


def get_class(class_id):
    try:
        return DATA_CLASSES[class_id.upper()]
    except KeyError:
        raise DomainError(
            f"unknown data class '{class_id}' (expected one of {', '.join(DATA_CLASSES)})"
        ) from None


def process_config(spec, horizon=10):
    return ProcessConfig(
        energy_noise=spec.energy_noise,
        price_noise=DiscretizedGaussian(sigma=spec.price_sigma, radius=PRICE_RADIUS),
        price_kind=PriceProcessKind(variant=spec.price_variant),
        horizon=horizon,
    )


# ---- Instances ----

def instance_filename(class_id, index):
    return f"{class_id}_{index:05d}.csv"


def generate_instances(spec, n, seed, out_dir=None, horizon=10, zero_noise=False):
    """
    Sample n trajectories of the class; instance i always comes from the
    stream ("instances", class, i) so any subset regenerates identically.
    Files are written to out_dir when given.
    """
    if n < 1:
        raise DomainError(f"instance count must be positive, got {n}")

    cfg = process_config(spec, horizon)
    if zero_noise:
        cfg = cfg.without_noise()
    trajectories = [
        sample_trajectory(cfg, derive(seed, "instances", spec.index, i)) for i in range(n)
    ]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, trajectory in enumerate(trajectories):
            formats.write_instance(out_dir / instance_filename(spec.class_id, i), trajectory)
        logger.info(f"Wrote {n} {spec.class_id} instances to {out_dir}")
    return trajectories


def load_instances(directory, class_id=None):
    """(instance id, trajectory) pairs sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DomainError(f"instance directory {directory} does not exist")
    pattern = f"{class_id.upper()}_*.csv" if class_id else "*.csv"
    paths = sorted(directory.glob(pattern))
    if not paths:
        raise DomainError(f"no instances matching {pattern} in {directory}")
    return [(path.stem, formats.read_instance(path)) for path in paths]


# ---- Scoring ----

@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    policy_revenue: float
    oracle_revenue: float
    pct_optimal: float = None
    excluded: bool = False


def percent_optimal(policy_revenue, oracle_revenue):
    if oracle_revenue <= 0:
        raise DomainError(f"percent optimal undefined for oracle revenue {oracle_revenue}")
    return 100.0 * policy_revenue / oracle_revenue


def score_instance(policy, instance_id, trajectory, params, initial_storage=0, mode=ONLINE_GREEDY):
    oracle = solve_deterministic(DeterministicInstance(trajectory, params, initial_storage))
    revenue, _ = apply_policy(policy, trajectory, initial_storage, params, mode)
    if oracle.revenue <= 0:
        return InstanceResult(instance_id, revenue, oracle.revenue, excluded=True)
    pct = percent_optimal(revenue, oracle.revenue)
    if pct > 100.0 + HINDSIGHT_TOLERANCE:
        raise HindsightViolation(
            f"{instance_id}: policy revenue {revenue} beats the hindsight optimum {oracle.revenue}"
        )
    return InstanceResult(instance_id, revenue, oracle.revenue, pct_optimal=pct)


def _score_item(item):
    policy, instance_id, trajectory, params, initial_storage, mode = item
    return score_instance(policy, instance_id, trajectory, params, initial_storage, mode)


def evaluate_policy_on_class(policy, instances, params, initial_storage=0, mode=ONLINE_GREEDY, jobs=1):
    """One InstanceResult per (instance id, trajectory), in input order."""
    if not instances:
        raise DomainError("no instances to evaluate")
    items = [(policy, iid, traj, params, initial_storage, mode) for iid, traj in instances]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_item, items, chunksize=max(1, len(items) // (4 * jobs))))
    else:
        results = [_score_item(item) for item in items]

    excluded = [r for r in results if r.excluded]
    for r in excluded:
        logger.warning(
            f"Excluded {r.instance_id}: oracle revenue {r.oracle_revenue:.4f}, "
            f"policy revenue {r.policy_revenue:.4f}"
        )
    return results


@dataclass(frozen=True)
class ClassSummary:
    class_id: str
    scenario: str
    architecture: str
    n_included: int
    n_excluded: int
    mean_pct_optimal: float = None
    prop_above_threshold: float = None
    threshold: float = DEFAULT_THRESHOLD


def summarize(results, threshold=DEFAULT_THRESHOLD, class_id="", scenario="", architecture=""):
    if not results:
        raise DomainError("cannot summarize an empty result list")
    included = [r.pct_optimal for r in results if not r.excluded]
    mean = prop = None
    if included:
        mean = math.fsum(included) / len(included)
        prop = sum(1 for pct in included if pct > threshold) / len(included)
    return ClassSummary(
        class_id=class_id,
        scenario=scenario,
        architecture=architecture,
        n_included=len(included),
        n_excluded=len(results) - len(included),
        mean_pct_optimal=mean,
        prop_above_threshold=prop,
        threshold=threshold,
    )


# ---- Plot data ----

PLOT_SERIES = ("mean_pct_optimal", "prop_gt_80")
PLOT_ARCHITECTURES = ("ols", "svr", "nn")


def _class_order(class_id):
    try:
        return (0, int(class_id[1:]))
    except ValueError:
        return (1, class_id)


def plotdata_rows(summary_rows):
    """
    Pivot summary rows (dicts as read by formats.read_summary_rows) into
    one row per (series, scenario, class) with a column per architecture.
    Later rows win when a cell appears twice.
    """
    cells = {}
    for row in summary_rows:
        if row["arch"] not in PLOT_ARCHITECTURES:
            continue
        for series in PLOT_SERIES:
            key = (series, row["scenario"], row["class"])
            cells.setdefault(key, {})[row["arch"]] = row[series]

    rows = []
    for series, scenario, class_id in sorted(
        cells, key=lambda k: (PLOT_SERIES.index(k[0]), k[1], _class_order(k[2]))
    ):
        values = cells[(series, scenario, class_id)]
        rows.append({"series": series, "scenario": scenario, "class": class_id, **values})
    return rows
