from django.conf import settings

from energy.bench import DATA_CLASSES, generate_instances, get_class
from energy.exceptions import ConfigError
from energy.management.base import EnergyCommand


class Command(EnergyCommand):
    help = "Generate benchmark instances (one CSV trajectory per instance) for S1-S13 classes."

    def add_command_arguments(self, parser):
        parser.add_argument(
            "--class",
            dest="classes",
            action="append",
            help="Data class id (repeatable). Default: desk-scale classes, or all 13 with --full",
        )
        parser.add_argument("-n", "--instances", type=int, help="Instances per class")
        parser.add_argument("-T", "--horizon", type=int, help="Periods per instance")
        parser.add_argument("--out", help="Output directory (default: instances_dir or ./instances)")
        parser.add_argument(
            "--zero-noise",
            action="store_true",
            help="Force every increment to zero (constant trajectories after period 1)",
        )

    def config_overrides(self, options):
        return {"instances": options.get("instances"), "horizon": options.get("horizon")}

    def run(self, cfg, options):
        if options.get("classes"):
            class_ids = options["classes"]
        elif options.get("full"):
            class_ids = list(DATA_CLASSES)
        else:
            class_ids = settings.ENERGY["DESK_SCALE"]["classes"]
        unknown = [c for c in class_ids if c.upper() not in DATA_CLASSES]
        if unknown:
            raise ConfigError(f"unknown data class '{unknown[0]}' (expected one of S1-S13)")
        specs = [get_class(class_id) for class_id in class_ids]
        out_dir = options.get("out") or cfg.instances_dir or "instances"

        for spec in specs:
            generate_instances(
                spec,
                cfg.instances,
                cfg.seed,
                out_dir=out_dir,
                horizon=cfg.horizon,
                zero_noise=options.get("zero_noise", False),
            )
        self.stdout.write(
            self.style.SUCCESS(
                f"Generated {cfg.instances} instances for {', '.join(s.class_id for s in specs)} in {out_dir}"
            )
        )
