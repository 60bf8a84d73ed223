import csv
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from energy import formats
from energy.config import parse_config
from energy.exceptions import DomainError
from energy.models import BenchmarkSummary, TrainingRun
from energy.oracle import DeterministicInstance, solve_deterministic
from energy.snes_model import BatteryParams


def run(*args):
    out = StringIO()
    call_command(*args, "--jobs", "1", stdout=out)
    return out.getvalue()


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.instances = self.root / "instances"


class GenCommandTests(CommandTestCase):
    def test_writes_one_file_per_instance(self):
        output = run("gen", "--class", "S1", "--class", "s12", "-n", "3", "--out", str(self.instances))
        names = sorted(p.name for p in self.instances.iterdir())
        self.assertEqual(
            names,
            ["S12_00000.csv", "S12_00001.csv", "S12_00002.csv", "S1_00000.csv", "S1_00001.csv", "S1_00002.csv"],
        )
        self.assertIn("Generated 3 instances", output)
        with (self.instances / "S1_00000.csv").open() as fh:
            self.assertEqual(next(csv.reader(fh)), ["t", "E", "D", "C", "P"])

    def test_horizon_flag(self):
        run("gen", "--class", "S4", "-n", "1", "-T", "5", "--out", str(self.instances))
        self.assertEqual(len(formats.read_instance(self.instances / "S4_00000.csv")), 5)

    def test_unknown_class_exits_with_one(self):
        with self.assertRaises(CommandError) as ctx:
            run("gen", "--class", "S14", "--out", str(self.instances))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertFalse(self.instances.exists())


class OracleCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        run("gen", "--class", "S3", "-n", "1", "--out", str(self.instances))
        self.instance = self.instances / "S3_00000.csv"

    def test_prints_hindsight_revenue(self):
        output = run("oracle", str(self.instance), "--scenario", "low")
        trajectory = formats.read_instance(self.instance)
        expected = solve_deterministic(DeterministicInstance(trajectory, BatteryParams.for_scenario("low")))
        self.assertEqual(output.strip(), f"revenue={expected.revenue!r}")

    def test_trace_file_has_labels(self):
        trace = self.root / "trace.csv"
        run("oracle", str(self.instance), "--trace", str(trace))
        with trace.open() as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual(len(rows), 10)
        self.assertIn("action", rows[0])
        self.assertEqual(rows[0]["prior"], "0")

    def test_sell_price_above_buy_price_is_rejected(self):
        bad = self.root / "bad.csv"
        bad.write_text("t,E,D,C,P\n1,3,2,5,6\n")
        with self.assertRaises(DomainError):
            formats.read_instance(bad)
        with self.assertRaises(CommandError) as ctx:
            run("oracle", str(bad))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_negative_quantities_are_rejected(self):
        bad = self.root / "bad.csv"
        bad.write_text("t,E,D,C,P\n1,-1,2,5,3\n")
        with self.assertRaises(DomainError):
            formats.read_instance(bad)

    def test_missing_instance_is_a_runtime_failure(self):
        with self.assertRaises(CommandError) as ctx:
            run("oracle", str(self.root / "missing.csv"))
        self.assertEqual(ctx.exception.returncode, 2)


class TrainAndEvalCommandTests(CommandTestCase):
    def train(self, *extra):
        policy = self.root / "policy.csv"
        output = run(
            "train", "--class", "S12", "--arch", "ols", "--scenario", "high",
            "-M", "5", "-N", "1", "--levels", "0,3", "--samples", "3",
            "--out", str(policy), "--diagnostics", str(self.root / "rounds.csv"), *extra,
        )
        return policy, output

    def test_train_writes_policy_model_and_diagnostics(self):
        policy, output = self.train("--record")
        self.assertTrue(policy.exists())
        self.assertTrue((self.root / "policy.model.txt").exists())
        self.assertIn("round=1 generation=0 rows=100", output)
        self.assertIn("round=2 generation=1", output)
        with (self.root / "rounds.csv").open() as fh:
            self.assertEqual(len(list(csv.reader(fh))), 3)

        run_row = TrainingRun.objects.get()
        self.assertEqual((run_row.class_id, run_row.architecture, run_row.trajectories), ("S12", "ols", 5))
        self.assertEqual(run_row.rounds_log.count(), 2)
        self.assertIsNone(run_row.rounds_log.get(round_number=2).train_loss)
        self.assertIsNotNone(run_row.final_mean_revenue)

    def test_eval_naive_baseline_records_summary(self):
        run("gen", "--class", "S1", "-n", "4", "--out", str(self.instances))
        summary = self.root / "summaries.csv"
        results = self.root / "results.csv"
        output = run(
            "eval", "--instances", str(self.instances), "--class", "S1",
            "--summary", str(summary), "--results", str(results), "--record",
        )
        self.assertIn("class=S1 scenario=high arch=naive", output)
        rows = formats.read_summary_rows(summary)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["n_included"] + rows[0]["n_excluded"], 4)

        recorded = BenchmarkSummary.objects.get()
        self.assertEqual((recorded.architecture, recorded.apply_mode), ("naive", "table"))
        self.assertEqual(recorded.instances.count(), 4)

    def test_eval_trained_policy_and_plot(self):
        policy, _ = self.train()
        run("gen", "--class", "S12", "-n", "3", "--out", str(self.instances))
        summary = self.root / "summaries.csv"
        for extra in ((), ("--policy", str(policy), "--arch", "ols")):
            run("eval", "--instances", str(self.instances), "--class", "S12", "--summary", str(summary), *extra)
        arches = [row["arch"] for row in formats.read_summary_rows(summary)]
        self.assertEqual(arches, ["naive", "ols"])

        plot = self.root / "plot.csv"
        run("plotdata", str(summary), "--out", str(plot))
        with plot.open() as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual([r["series"] for r in rows], ["mean_pct_optimal", "prop_gt_80"])
        self.assertEqual(rows[0]["class"], "S12")
        self.assertEqual(rows[0]["nn"], "")


class ConfigFlagTests(CommandTestCase):
    def test_dump_config_round_trips(self):
        output = run("train", "--dump-config", "--class", "S7", "--arch", "svr", "--seed", "5")
        cfg = parse_config(text=output)
        self.assertEqual((cfg.class_id, cfg.architecture, cfg.seed, cfg.jobs), ("S7", "svr", 5, 1))
        self.assertEqual(cfg.trajectories, parse_config(desk=True).trajectories)

    def test_invalid_config_file_exits_with_one(self):
        path = self.root / "bad.env"
        path.write_text("gamma_inject=0\n")
        with self.assertRaises(CommandError) as ctx:
            run("train", "--config", str(path))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_unknown_key_exits_with_one(self):
        path = self.root / "bad.env"
        path.write_text("colour=red\n")
        with self.assertRaises(CommandError) as ctx:
            run("gen", "--config", str(path), "--out", str(self.instances))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_missing_instance_directory_exits_with_two(self):
        with self.assertRaises(CommandError) as ctx:
            run("eval", "--instances", str(self.root / "nowhere"))
        self.assertEqual(ctx.exception.returncode, 2)
