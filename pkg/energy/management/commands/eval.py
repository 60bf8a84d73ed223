import logging
from pathlib import Path

from energy import formats
from energy.apinn import APPLY_MODES, ONLINE_GREEDY, TABLE, PolicyTable
from energy.bench import evaluate_policy_on_class, load_instances, summarize
from energy.management.base import EnergyCommand
from energy.regress import ARCHITECTURES, load_model

from .train import default_model_path

logger = logging.getLogger(__name__)


class Command(EnergyCommand):
    help = "Score a trained policy (or the naive policy) against the hindsight optimum on a set of instances."
    supports_record = True

    def add_command_arguments(self, parser):
        parser.add_argument("--instances", dest="instances_dir", help="Directory of instance CSVs from `gen`")
        parser.add_argument("--class", dest="class_id", help="Data class id, S1..S13")
        parser.add_argument("--scenario", choices=("high", "low"), help="Efficiency scenario")
        parser.add_argument("--policy", help="Policy table CSV from `train`; omit to score the naive policy")
        parser.add_argument("--model", help="Value model file (default: next to the policy)")
        parser.add_argument("--arch", choices=ARCHITECTURES, help="Architecture label for the summary row")
        parser.add_argument(
            "--mode",
            choices=APPLY_MODES,
            default=ONLINE_GREEDY,
            help="table: stored decisions with naive fallback; online_greedy: argmax with the value model",
        )
        parser.add_argument("--threshold", type=float, default=80.0, help="Percent-optimal threshold")
        parser.add_argument("--summary", help="Summary CSV the class row is appended to")
        parser.add_argument("--results", help="Per-instance results CSV")

    def config_overrides(self, options):
        return {
            "instances_dir": options.get("instances_dir"),
            "class_id": options.get("class_id"),
            "scenario": options.get("scenario"),
            "architecture": options.get("arch"),
            "policy_path": options.get("policy"),
            "model_path": options.get("model"),
            "summary_path": options.get("summary"),
            "results_path": options.get("results"),
        }

    def load_policy(self, cfg, mode):
        if not cfg.policy_path:
            return PolicyTable(), "naive", TABLE
        entries = formats.read_policy_entries(cfg.policy_path)
        model = None
        model_path = Path(cfg.model_path or default_model_path(cfg.policy_path))
        if model_path.exists():
            model = load_model(model_path)
        elif mode == ONLINE_GREEDY:
            logger.warning(f"No value model at {model_path}; online greedy falls back to myopic decisions")
        return PolicyTable(entries=entries, model=model), cfg.architecture, mode

    def run(self, cfg, options):
        policy, label, mode = self.load_policy(cfg, options["mode"])
        instances = load_instances(cfg.instances_dir or "instances", cfg.class_id)
        if len(instances) > cfg.instances:
            instances = instances[: cfg.instances]

        results = evaluate_policy_on_class(
            policy,
            instances,
            cfg.battery_params(),
            initial_storage=cfg.initial_storage,
            mode=mode,
            jobs=cfg.jobs,
        )
        summary = summarize(
            results,
            threshold=options["threshold"],
            class_id=cfg.class_id,
            scenario=cfg.scenario,
            architecture=label,
        )

        if cfg.summary_path:
            formats.write_summaries(cfg.summary_path, [summary], append=True)
        if cfg.results_path:
            formats.write_instance_results(cfg.results_path, results)
        if options.get("record"):
            from energy.models import BenchmarkSummary

            row = BenchmarkSummary.record(summary, results, mode)
            logger.info(f"Recorded benchmark summary #{row.id}")

        mean = "" if summary.mean_pct_optimal is None else f"{summary.mean_pct_optimal:.4f}"
        prop = "" if summary.prop_above_threshold is None else f"{summary.prop_above_threshold:.4f}"
        self.stdout.write(
            f"class={summary.class_id} scenario={summary.scenario} arch={summary.architecture} "
            f"n_included={summary.n_included} n_excluded={summary.n_excluded} "
            f"mean_pct_optimal={mean} prop_gt_80={prop}"
        )
