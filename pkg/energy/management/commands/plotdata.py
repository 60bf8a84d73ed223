from energy import formats
from energy.bench import plotdata_rows
from energy.management.base import EnergyCommand


class Command(EnergyCommand):
    help = "Pivot benchmark summary CSVs into class x architecture series for plotting."

    def add_command_arguments(self, parser):
        parser.add_argument("summaries", nargs="+", help="Summary CSV files written by `eval`")
        parser.add_argument("--out", required=True, help="Output CSV (series,scenario,class,ols,svr,nn)")

    def run(self, cfg, options):
        summary_rows = []
        for path in options["summaries"]:
            summary_rows.extend(formats.read_summary_rows(path))
        rows = plotdata_rows(summary_rows)
        formats.write_plotdata(options["out"], rows)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(rows)} plot rows to {options['out']}"))
