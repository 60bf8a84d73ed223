"""
Shared plumbing for the energy management commands: the common flags,
config loading and the exit-code contract (0 ok, 1 invalid
configuration, 2 runtime failure).
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from energy.config import dump_config, parse_config
from energy.exceptions import ConfigError, EnergyError

logger = logging.getLogger(__name__)

VALIDATION_ERROR = 1
RUNTIME_ERROR = 2


class EnergyCommand(BaseCommand):
    # Whether --record (persist to the results database) is offered
    supports_record = False

    def add_arguments(self, parser):
        parser.add_argument("--config", help="KEY=VALUE config file (dotenv syntax)")
        parser.add_argument("--seed", type=int, help="Run seed; every random stream derives from it")
        parser.add_argument("--jobs", type=int, help="Worker processes (default: available cores)")
        parser.add_argument(
            "--full",
            action="store_true",
            help="Use the full-scale run sizes instead of the desk-scale defaults",
        )
        parser.add_argument(
            "--dump-config",
            action="store_true",
            help="Print the resolved configuration and exit",
        )
        if self.supports_record:
            parser.add_argument(
                "--record",
                action="store_true",
                help="Also store the results in the database",
            )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def config_overrides(self, options):
        """Map command flags onto config keys; None means unset."""
        return {}

    def load_config(self, options):
        overrides = {"seed": options.get("seed"), "jobs": options.get("jobs")}
        overrides.update(self.config_overrides(options))
        if options.get("full"):
            logger.warning("Full-scale run sizes selected: expect a multi-hour runtime")
        return parse_config(
            path=options.get("config"),
            overrides=overrides,
            desk=not options.get("full"),
        )

    def handle(self, *args, **options):
        try:
            cfg = self.load_config(options)
            if options.get("dump_config"):
                self.stdout.write(dump_config(cfg), ending="")
                return
            self.run(cfg, options)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=VALIDATION_ERROR) from exc
        except (EnergyError, OSError) as exc:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {exc}")
            raise CommandError(str(exc), returncode=RUNTIME_ERROR) from exc

    def run(self, cfg, options):
        raise NotImplementedError
