"""Tests for the command line."""

import contextlib
import csv
import io
import json
import math
import pathlib
import tempfile

import terra.main
from terra.scenario import load_scenario
from tests.test_all import SCENARIO_DIR, TestUtils


class MainTests(TestUtils):
    """Tests that run terra.main.main end to end."""

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = pathlib.Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_main(self, *argv):
        """Run the command line and return (status, captured output)."""
        out = io.StringIO()
        with contextlib.redirect_stdout(out), \
                contextlib.redirect_stderr(io.StringIO()):
            status = terra.main.main(list(argv))
        return status, out.getvalue()

    def simulate(self, out):
        return self.run_main("simulate",
                             str(SCENARIO_DIR / "static_search.json"),
                             "--runs", "2", "--seed-base", "7",
                             "--horizon", "0.6", "--out", str(out))

    def test_states(self):
        path = self.dir / "states.dot"
        status, _ = self.run_main("states", "--out", str(path))
        self.assertEqual(status, 0)
        self.assertTrue(path.read_text().startswith("digraph terra {"))

    def test_states_stdout(self):
        status, text = self.run_main("states")
        self.assertEqual(status, 0)
        self.assertIn("->", text)

    def test_density(self):
        path = self.dir / "density.csv"
        status, _ = self.run_main("density", "--k", "1", "--grid", "10", "20",
                                  "--range-list", "200", "--out", str(path))
        self.assertEqual(status, 0)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["R_m", "lambda_per_km2", "prob"])
        self.assertEqual(len(rows), 4)
        self.assertEqual(float(rows[1][1]), 10.0)
        self.assertAlmostEqual(float(rows[1][2]),
                               1 - math.exp(-10 * math.pi * 0.04))
        self.assertAlmostEqual(float(rows[2][2]), 0.9)

    def test_density_annotations(self):
        status, text = self.run_main("density", "--range-list", "100",
                                     "--annotate")
        self.assertEqual(status, 0)
        self.assertEqual(text.count("# unverified"), 2)

    def test_density_bad_probability(self):
        with self.assertRaises(SystemExit) as cm:
            self.run_main("density", "--target-prob", "1.5")
        self.assertEqual(cm.exception.code, 2)

    def test_codebook(self):
        path = self.dir / "book.csv"
        status, _ = self.run_main("codebook", "--elements", "8", "8",
                                  "--grid", "8", "4", "--sector-zen", "-30",
                                  "30", "--out", str(path))
        self.assertEqual(status, 0)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(len(rows), 33)
        self.assertEqual(rows[0][:3], ["beam_id", "row", "col"])
        self.assertEqual(rows[9][:3], ["8", "1", "0"])

    def test_linear_codebook_has_no_zenith_width(self):
        status, text = self.run_main("codebook")
        self.assertEqual(status, 0)
        rows = list(csv.reader(io.StringIO(text)))
        self.assertEqual(len(rows), 26)
        self.assertEqual(rows[1][-1], "")

    def test_codebook_default_sector(self):
        status, text = self.run_main("codebook")
        self.assertEqual(status, 0)
        rows = list(csv.reader(io.StringIO(text)))
        self.assertAlmostEqual(float(rows[1][3]), -50.0)
        self.assertAlmostEqual(float(rows[-1][3]), 60.0)

    def test_missing_scenario(self):
        status, text = self.run_main("simulate",
                                     str(self.dir / "missing.json"))
        self.assertEqual(status, 1)
        self.assertIn("could not read scenario file", text)

    def test_simulate_and_analyze(self):
        out = self.dir / "runs"
        status, _ = self.simulate(out)
        self.assertEqual(status, 0)
        traces = sorted(out.glob("run_*.trace.jsonl"))
        self.assertEqual([p.name for p in traces],
                         ["run_0000.trace.jsonl", "run_0001.trace.jsonl"])

        report = json.loads((out / "report.json").read_text())
        self.assertEqual(report["runs"], 2)
        self.assertEqual(report["seeds"], [7, 8])
        self.assertEqual(report["scenario"], "static_search")
        self.assertEqual(report["blockage_events"], 0)

        again = self.dir / "again.json"
        status, _ = self.run_main(
            "analyze", *map(str, traces),
            "--scenario", str(SCENARIO_DIR / "static_search.json"),
            "--out", str(again))
        self.assertEqual(status, 0)
        self.assertEqual(again.read_text(),
                         (out / "report.json").read_text())

    def test_simulation_is_repeatable(self):
        first, second = self.dir / "a", self.dir / "b"
        self.simulate(first)
        self.simulate(second)
        for name in ("run_0000.trace.jsonl", "run_0001.trace.jsonl"):
            self.assertEqual((first / name).read_text(),
                             (second / name).read_text())

    def test_overhead_table(self):
        out = self.dir / "runs"
        self.simulate(out)
        table = self.dir / "overhead.csv"
        status, _ = self.run_main(
            "analyze", str(out / "run_0000.trace.jsonl"),
            "--scenario", str(SCENARIO_DIR / "static_search.json"),
            "--out", str(self.dir / "report.json"),
            "--overhead", str(table))
        self.assertEqual(status, 0)
        with open(table, newline="") as f:
            rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["strategy", "max_measurements", "source"])
        self.assertEqual(rows[2], ["Exhaustive Search", "25", "simulated"])
        self.assertEqual(rows[-1], ["Agile Link", "110", "reported"])

    def test_overhead_needs_codebook(self):
        status, text = self.run_main("analyze", "x.jsonl", "--overhead",
                                     str(self.dir / "o.csv"))
        self.assertEqual(status, 1)
        self.assertIn("--overhead needs", text)

    def test_cdf_without_blockage_warns(self):
        out = self.dir / "runs"
        self.simulate(out)
        cdf = self.dir / "cdf.csv"
        status, text = self.run_main(
            "analyze", str(out / "run_0000.trace.jsonl"), "--cdf", str(cdf))
        self.assertEqual(status, 0)
        self.assertFalse(cdf.exists())
        self.assertIn("no CDF written", text)


class BatchTests(TestUtils):
    """Tests for running seeded batches."""

    def test_workers_do_not_change_traces(self):
        scenario = load_scenario(SCENARIO_DIR / "blockage_concrete.json",
                                 1.5).scenario
        inline = terra.main.simulate_batch(scenario, 2, 5, jobs=1)
        pooled = terra.main.simulate_batch(scenario, 2, 5, jobs=2)
        self.assertEqual([tr.lines() for tr in inline],
                         [tr.lines() for tr in pooled])
        self.assertEqual([tr.header["seed"] for tr in pooled], [5, 6])
