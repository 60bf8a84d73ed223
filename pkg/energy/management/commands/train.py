import logging
from pathlib import Path

from energy import formats
from energy.apinn import APPLY_MODES, run_apinn
from energy.management.base import EnergyCommand
from energy.regress import ARCHITECTURES, save_model
from energy.streams import Streams

logger = logging.getLogger(__name__)


def default_model_path(policy_path):
    path = Path(policy_path)
    return path.with_name(f"{path.stem}.model.txt")


class Command(EnergyCommand):
    help = "Train an approximate policy iteration policy on one data class."
    supports_record = True

    def add_command_arguments(self, parser):
        parser.add_argument("--class", dest="class_id", help="Data class id, S1..S13")
        parser.add_argument("--arch", choices=ARCHITECTURES, help="Value function architecture")
        parser.add_argument("--scenario", choices=("high", "low"), help="Efficiency scenario")
        parser.add_argument("-M", "--trajectories", type=int, help="Trajectories per initial level")
        parser.add_argument("-N", "--rounds", type=int, help="Policy improvement rounds")
        parser.add_argument("-T", "--horizon", type=int, help="Periods per trajectory")
        parser.add_argument("--levels", help="Comma-separated initial battery levels")
        parser.add_argument("--samples", type=int, help="Improvement samples per initial level")
        parser.add_argument("--mode", choices=APPLY_MODES, help="How rollouts apply the policy")
        parser.add_argument("--out", help="Policy table CSV (t,prior,E,D,C,P,xb,xs,xr)")
        parser.add_argument("--model-out", help="Value model file (default: next to the policy)")
        parser.add_argument("--diagnostics", help="CSV log the per-round diagnostics are appended to")

    def config_overrides(self, options):
        return {
            "class_id": options.get("class_id"),
            "architecture": options.get("arch"),
            "scenario": options.get("scenario"),
            "trajectories": options.get("trajectories"),
            "rounds": options.get("rounds"),
            "horizon": options.get("horizon"),
            "levels": options.get("levels"),
            "improvement_samples": options.get("samples"),
            "apply_mode": options.get("mode"),
            "policy_path": options.get("out"),
            "model_path": options.get("model_out"),
            "diagnostics_path": options.get("diagnostics"),
        }

    def run(self, cfg, options):
        policy_path = cfg.policy_path or f"policy_{cfg.class_id}_{cfg.scenario}_{cfg.architecture}.csv"
        model_path = cfg.model_path or default_model_path(policy_path)

        logger.info(
            f"Training {cfg.architecture} on {cfg.class_id}/{cfg.scenario}: "
            f"M={cfg.trajectories}, N={cfg.rounds}, T={cfg.horizon}, seed={cfg.seed}"
        )
        result = run_apinn(cfg.apinn_config(), Streams(cfg.seed))

        formats.write_policy_entries(policy_path, result.policy.entries)
        save_model(result.model, model_path)
        if cfg.diagnostics_path:
            formats.append_diagnostics(cfg.diagnostics_path, result.diagnostics)

        if options.get("record"):
            from energy.models import TrainingRun

            run = TrainingRun.record(cfg, result.diagnostics, policy_path, model_path)
            logger.info(f"Recorded training run #{run.id}")

        for d in result.diagnostics:
            self.stdout.write(
                f"round={d.round} generation={d.generation} rows={d.dataset_size} "
                f"train_loss={'' if d.train_loss is None else f'{d.train_loss:.6g}'} "
                f"validation_loss={'' if d.validation_loss is None else f'{d.validation_loss:.6g}'} "
                f"mean_revenue={d.mean_revenue:.6g} fallbacks={d.fallbacks}"
            )
        self.stdout.write(
            self.style.SUCCESS(
                f"Wrote {len(result.policy)} policy entries (generation {result.policy.generation}) "
                f"to {policy_path} and the model to {model_path}"
            )
        )
