import sys

from energy import formats
from energy.exceptions import DomainError
from energy.management.base import EnergyCommand
from energy.oracle import DeterministicInstance, check_ip_feasibility, solve_deterministic
from energy.snes_model import stage_profit


class Command(EnergyCommand):
    help = "Solve one instance to hindsight optimality and print its revenue."

    def add_command_arguments(self, parser):
        parser.add_argument("instance", help="Instance CSV (t,E,D,C,P)")
        parser.add_argument("--scenario", choices=("high", "low"), help="Efficiency scenario")
        parser.add_argument("--initial-storage", type=int, help="Battery level before period 1")
        parser.add_argument("--trace", help="Write the optimal decision trace CSV here ('-' for stdout)")

    def config_overrides(self, options):
        return {
            "scenario": options.get("scenario"),
            "initial_storage": options.get("initial_storage"),
        }

    def run(self, cfg, options):
        trajectory = formats.read_instance(options["instance"])
        inst = DeterministicInstance(trajectory, cfg.battery_params(), cfg.initial_storage)
        solution = solve_deterministic(inst)

        violations = check_ip_feasibility(solution, inst)
        if violations:
            raise DomainError(
                "oracle solution violates "
                + ", ".join(f"{v.constraint} (t={v.t})" for v in violations)
            )

        trace = options.get("trace")
        if trace:
            rows = []
            prior = inst.initial_storage
            for t, (w, d) in enumerate(zip(trajectory, solution.decisions), start=1):
                rows.append((t, prior, w, d, stage_profit(d, prior, w, inst.params)))
                prior = d.store
            if trace == "-":
                formats.write_trace(self.stdout, rows, solution.action_labels)
            else:
                with open(trace, "w", newline="", encoding="utf-8") as fh:
                    formats.write_trace(fh, rows, solution.action_labels)

        self.stdout.write(f"revenue={solution.revenue!r}")
