from __future__ import annotations

import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from .models import RunReport
from .services.corpus import MAX_DRAW_FACTOR, SUITES, CorpusBounds, replay_instance, run_suite
from .services.runs import (
    create_corpus_run,
    process_corpus_run,
    report_payload,
)


class CommandTestCase(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_graph(self, name: str, data: dict) -> str:
        path = self.tmp / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    def run_command(self, *args) -> tuple[str, str]:
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err)
        return out.getvalue(), err.getvalue()

    def run_failing(self, *args) -> tuple[CommandError, str]:
        err = StringIO()
        with self.assertRaises(CommandError) as ctx:
            call_command(*args, stdout=StringIO(), stderr=err)
        return ctx.exception, err.getvalue()


def cycle_document(n: int) -> dict:
    return {
        "schema": 1,
        "vertices": list(range(n)),
        "edges": [{"id": i, "u": i, "v": (i + 1) % n} for i in range(n)],
    }


PATH_DOCUMENT = {
    "schema": 1,
    "vertices": [0, 1, 2],
    "edges": [{"id": 0, "u": 0, "v": 1}, {"id": 1, "u": 1, "v": 2}],
}


class OrientCommandTests(CommandTestCase):
    def test_cycle_is_oriented_to_stdout(self):
        out, _err = self.run_command("orient", self.write_graph("c4.json", cycle_document(4)), "--k", "1")
        payload = json.loads(out)
        self.assertEqual(payload["command"], "orient")
        self.assertEqual(payload["graph"]["edges"], [])
        self.assertEqual(len(payload["graph"]["directed_edges"]), 4)
        self.assertTrue(payload["well_balanced"]["passed"])
        tails = sorted(arc["tail"] for arc in payload["graph"]["directed_edges"])
        self.assertEqual(tails, [0, 1, 2, 3])

    def test_json_and_dot_files(self):
        json_path = self.tmp / "out" / "oriented.json"
        dot_path = self.tmp / "out" / "oriented.dot"
        out, _err = self.run_command(
            "orient",
            self.write_graph("c4.json", cycle_document(4)),
            "--json",
            str(json_path),
            "--dot",
            str(dot_path),
        )
        self.assertIn("oriented edges=4 k=1", out)
        self.assertTrue(json.loads(json_path.read_text())["well_balanced"]["passed"])
        self.assertEqual(dot_path.read_text().count("->"), 4)

    def test_path_reports_the_cut(self):
        dot_path = self.tmp / "cut.dot"
        exc, err = self.run_failing("orient", self.write_graph("p3.json", PATH_DOCUMENT), "--dot", str(dot_path))
        self.assertEqual(exc.returncode, 2)
        cut = json.loads(err)
        self.assertEqual(cut["k"], 1)
        self.assertEqual(cut["cut"]["size"], 1)
        self.assertIn("cut-side", dot_path.read_text())

    def test_malformed_input(self):
        path = self.tmp / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        exc, _err = self.run_failing("orient", str(path))
        self.assertEqual(exc.returncode, 1)
        exc, _err = self.run_failing("orient", str(self.tmp / "missing.json"))
        self.assertEqual(exc.returncode, 1)


class VerifyCommandTests(CommandTestCase):
    def test_orient_output_verifies(self):
        oriented = self.tmp / "oriented.json"
        self.run_command("orient", self.write_graph("c4.json", cycle_document(4)), "--json", str(oriented))
        out, _err = self.run_command("verify", str(oriented), "--k", "1")
        payload = json.loads(out)
        self.assertTrue(payload["passed"])
        self.assertTrue(payload["k_arc"]["passed"])
        self.assertEqual(payload["well_balanced"]["checked_pairs"], 12)

    def test_lopsided_orientation_fails(self):
        document = {
            "schema": 1,
            "vertices": [0, 1, 2, 3],
            "edges": [],
            "directed_edges": [
                {"id": 0, "tail": 0, "head": 1},
                {"id": 1, "tail": 1, "head": 2},
                {"id": 2, "tail": 3, "head": 2},
                {"id": 3, "tail": 0, "head": 3},
            ],
        }
        report_path = self.tmp / "verify.json"
        exc, _err = self.run_failing("verify", self.write_graph("bad.json", document), "--json", str(report_path))
        self.assertEqual(exc.returncode, 3)
        payload = json.loads(report_path.read_text())
        self.assertFalse(payload["passed"])
        self.assertEqual(payload["well_balanced"]["worst_pair"]["alpha"], 0)

    def test_directed_cycle_is_not_two_arc_connected(self):
        document = {
            "schema": 1,
            "vertices": [0, 1, 2],
            "directed_edges": [{"id": i, "tail": i, "head": (i + 1) % 3} for i in range(3)],
        }
        report_path = self.tmp / "c3_report.json"
        exc, _err = self.run_failing(
            "verify", self.write_graph("c3.json", document), "--k", "2", "--json", str(report_path)
        )
        self.assertEqual(exc.returncode, 3)
        k_arc = json.loads(report_path.read_text())["k_arc"]
        self.assertEqual(k_arc["worst_pair"], {"x": 0, "y": 1, "alpha": 1})
        certificate = k_arc["certificate"]
        self.assertEqual(certificate["value"], 1)
        self.assertEqual(certificate["paths"], [[0]])
        self.assertEqual(certificate["min_cut"]["side"], [0])
        self.assertEqual(certificate["leaving"], [0])

    def test_unoriented_graph_is_rejected(self):
        exc, _err = self.run_failing("verify", self.write_graph("c4.json", cycle_document(4)))
        self.assertEqual(exc.returncode, 1)


class CorpusCommandTests(CommandTestCase):
    def test_cut_identity_suite_passes(self):
        out, _err = self.run_command(
            "corpus", "cut-identity", "--seed", "7", "--count", "5", "--max-n", "5", "--max-m", "8"
        )
        self.assertIn("suite=cut-identity seed=7 instances=5 skipped=0 passed=5 failed=0", out)
        run = RunReport.objects.get()
        self.assertEqual(run.status, RunReport.STATUS_SUCCEEDED)
        self.assertTrue(run.all_passed)
        self.assertEqual(run.parameters, {"count": 5, "max_n": 5, "max_m": 8})
        self.assertIn("seconds", run.timings)

    def test_json_report_is_byte_identical_across_runs(self):
        first, second = self.tmp / "first.json", self.tmp / "second.json"
        args = ["corpus", "cut-identity", "--seed", "3", "--count", "4", "--max-n", "6", "--max-m", "9"]
        self.run_command(*args, "--json", str(first))
        self.run_command(*args, "--json", str(second))
        self.assertEqual(first.read_bytes(), second.read_bytes())
        payload = json.loads(first.read_text())
        self.assertEqual(payload["summary"], {"cut_identity": {"passed": 4, "failed": 0}})
        self.assertTrue(payload["passed"])
        self.assertNotIn("timings", payload)

    def test_argument_errors(self):
        exc, _err = self.run_failing("corpus", "no-such-suite")
        self.assertEqual(exc.returncode, 1)
        exc, _err = self.run_failing("corpus", "cut-identity", "--count", "0")
        self.assertEqual(exc.returncode, 1)
        self.assertFalse(RunReport.objects.exists())

    def test_replay_single_instance(self):
        out, _err = self.run_command("corpus", "cut-identity", "--seed", "7", "--count", "5", "--replay", "2")
        payload = json.loads(out)
        self.assertEqual(payload["index"], 2)
        self.assertEqual([check["check"] for check in payload["checks"]], ["cut_identity"])
        self.assertTrue(payload["checks"][0]["passed"])

    def test_runs_are_processed_in_the_foreground(self):
        self.run_command("corpus", "cut-identity", "--count", "3", "--max-n", "4", "--max-m", "6")
        run = RunReport.objects.get()
        self.assertEqual(run.status, RunReport.STATUS_SUCCEEDED)
        self.assertEqual(run.instances, 3)
        self.assertIsNotNone(run.finished_at)
        with self.assertRaises(TypeError):
            call_command("corpus", "cut-identity", mode="queue", stdout=StringIO())


class CorpusRunServiceTests(TestCase):
    def test_created_run_is_processed(self):
        run = create_corpus_run(suite="cut-identity", seed=11, count=2, max_n=4, max_m=6)
        self.assertEqual(run.status, RunReport.STATUS_QUEUED)
        run = process_corpus_run(run.pk)
        self.assertEqual(run.status, RunReport.STATUS_SUCCEEDED)
        self.assertEqual(report_payload(run)["inputs_digest"], run.inputs_digest)

    def test_suite_exception_marks_run_failed(self):
        run = create_corpus_run(suite="cut-identity", count=1)
        with patch("orientations.services.runs.run_suite", side_effect=RuntimeError("boom")):
            run = process_corpus_run(run.pk)
        self.assertEqual(run.status, RunReport.STATUS_FAILED)
        self.assertEqual(run.error_message, "boom")
        self.assertIsNotNone(run.finished_at)

    def test_finished_runs_are_not_reprocessed(self):
        run = create_corpus_run(suite="cut-identity", count=1)
        RunReport.objects.filter(pk=run.pk).update(status=RunReport.STATUS_SUCCEEDED, instances=99)
        with patch("orientations.services.runs.run_suite") as run_suite:
            run = process_corpus_run(run.pk)
        run_suite.assert_not_called()
        self.assertEqual(run.instances, 99)


LIFTING_DOCUMENT = {
    "schema": 1,
    "vertices": ["a", "b", "c", "d", "s"],
    "edges": [
        {"id": 0, "u": "s", "v": "a"},
        {"id": 1, "u": "s", "v": "b"},
        {"id": 2, "u": "s", "v": "c"},
        {"id": 3, "u": "s", "v": "d"},
        {"id": 4, "u": "a", "v": "b"},
        {"id": 5, "u": "a", "v": "b"},
        {"id": 6, "u": "c", "v": "d"},
        {"id": 7, "u": "c", "v": "d"},
        {"id": 8, "u": "a", "v": "c"},
        {"id": 9, "u": "b", "v": "d"},
    ],
}


class LiftingGraphCommandTests(CommandTestCase):
    def test_census_on_stdout(self):
        path = self.write_graph("spokes.json", LIFTING_DOCUMENT)
        out, _err = self.run_command("lifting_graph", path, "--s", "s", "--level", "4", "--A", "a", "b", "c", "d")
        payload = json.loads(out)
        self.assertEqual(payload["class"]["kind"], "complete_multipartite")
        self.assertEqual(payload["class"]["parts"], [[0, 1], [2, 3]])
        self.assertEqual(payload["lifting_graph"]["adjacency"], [[0, 2], [0, 3], [1, 2], [1, 3]])
        self.assertEqual(len(payload["frank_matching"]), 2)
        self.assertEqual(len(payload["dangerous_sets"]), 6)

    def test_json_and_dot_files(self):
        path = self.write_graph("spokes.json", LIFTING_DOCUMENT)
        json_path, dot_path = self.tmp / "lg.json", self.tmp / "lg.dot"
        out, _err = self.run_command(
            "lifting_graph", path, "--s", "s", "--level", "4", "--no-dangerous",
            "--json", str(json_path), "--dot", str(dot_path),
        )
        self.assertIn("class=complete_multipartite nodes=4", out)
        self.assertNotIn("dangerous_sets", json.loads(json_path.read_text()))
        text = dot_path.read_text()
        self.assertTrue(text.startswith('graph "lifting_graph"'))
        self.assertEqual(text.count(" -- "), 4)

    def test_errors(self):
        path = self.write_graph("spokes.json", LIFTING_DOCUMENT)
        exc, _err = self.run_failing("lifting_graph", path, "--s", "s", "--level", "5")
        self.assertEqual(exc.returncode, 2)
        exc, _err = self.run_failing("lifting_graph", path, "--s", "z", "--level", "4")
        self.assertEqual(exc.returncode, 1)
        exc, _err = self.run_failing("lifting_graph", path, "--s", "s", "--level", "2", "--A", "a", "b", "c", "d", "s")
        self.assertEqual(exc.returncode, 1)


class SimulateCommandTests(CommandTestCase):
    def test_zero_rounds_with_dot_output(self):
        dot_dir = self.tmp / "stages"
        out, _err = self.run_command("simulate", "doubled-ladder", "--k", "2", "--rounds", "0", "--dot", str(dot_dir))
        payload = json.loads(out)
        self.assertEqual(payload["generator"], "doubled-ladder")
        self.assertEqual(payload["rounds"], 0)
        self.assertEqual(payload["initial"]["A"], [[0, 0]])
        self.assertTrue((dot_dir / "stage_00.dot").exists())

    def test_ladder_ears_to_json(self):
        json_path = self.tmp / "sim.json"
        out, _err = self.run_command("simulate", "ladder", "--k", "1", "--rounds", "2", "--json", str(json_path))
        self.assertIn("generator=ladder k=1 stages=2", out)
        self.assertEqual(len(json.loads(json_path.read_text())["stages"]), 2)

    def test_connectivity_failure(self):
        exc, err = self.run_failing("simulate", "double-ray", "--k", "1", "--rounds", "1")
        self.assertEqual(exc.returncode, 2)
        self.assertEqual(json.loads(err)["cut"]["size"], 1)

    def test_argument_errors(self):
        exc, _err = self.run_failing("simulate", "torus")
        self.assertEqual(exc.returncode, 1)
        exc, _err = self.run_failing("simulate", "ladder", "--k", "1", "--rounds", "99")
        self.assertEqual(exc.returncode, 1)
        exc, _err = self.run_failing("simulate", "ladder", "--k", "0")
        self.assertEqual(exc.returncode, 1)


class DecomposeCommandTests(CommandTestCase):
    def test_double_ray_components(self):
        out, _err = self.run_command("decompose", "double-ray")
        payload = json.loads(out)
        self.assertEqual(payload["A"], [0])
        self.assertEqual([c["end"] for c in payload["components"]], ["+", "-"])
        self.assertEqual([len(c["boundary"]) for c in payload["components"]], [1, 1])

    def test_dot_marks_boundary_edges(self):
        dot_path = self.tmp / "decomposition.dot"
        self.run_command("decompose", "double-ray", "--json", str(self.tmp / "d.json"), "--dot", str(dot_path))
        self.assertIn("boundary", dot_path.read_text())

    def test_ray_graphs_are_reported(self):
        out, _err = self.run_command("decompose", "quadrupled-double-ray", "--ray-graphs")
        payload = json.loads(out)
        self.assertEqual([entry["end"] for entry in payload["ray_graphs"]], ["+", "-"])
        for entry, component in zip(payload["ray_graphs"], payload["components"]):
            self.assertEqual(len(entry["edges"]), 6)
            self.assertEqual({e for edge in entry["edges"] for e in edge}, set(component["boundary"]))

    def test_disconnected_ray_graph_exits_3(self):
        with patch("orientations.services.infinite._joining_count", return_value=0):
            exc, _err = self.run_failing("decompose", "quadrupled-double-ray", "--ray-graphs")
        self.assertEqual(exc.returncode, 3)
        self.assertIn("disconnected", str(exc))

    def test_figure1_check(self):
        out, _err = self.run_command(
            "decompose", "--figure1-check", "--depth", "4", "--max-level", "1", "--sizes", "2"
        )
        payload = json.loads(out)["figure1_check"]
        self.assertTrue(payload["passed"])
        self.assertEqual(payload["checked"], 15)

    def test_unknown_generator(self):
        exc, _err = self.run_failing("decompose", "torus")
        self.assertEqual(exc.returncode, 1)


def _coin_suite(rng, bounds):
    if rng.integers(2) == 0:
        return None
    return {"draw": int(rng.integers(1 << 30))}, []


def _never_suite(rng, bounds):
    return None


class CorpusDrawTests(SimpleTestCase):
    def test_count_is_admitted_instances(self):
        with patch.dict(SUITES, {"coin": (_coin_suite, CorpusBounds(count=20, max_n=2, max_m=2))}):
            report = run_suite("coin", seed=5, workers=1)
            self.assertEqual(report.instances, 20)
            self.assertGreater(report.skipped, 0)
            self.assertLessEqual(report.instances + report.skipped, 20 * MAX_DRAW_FACTOR)
            again = run_suite("coin", seed=5, workers=1)
        self.assertEqual((again.instances, again.skipped), (report.instances, report.skipped))

    def test_draws_stop_at_the_limit(self):
        with patch.dict(SUITES, {"never": (_never_suite, CorpusBounds(count=3, max_n=2, max_m=2))}):
            report = run_suite("never", seed=1, workers=1)
        self.assertEqual(report.instances, 0)
        self.assertEqual(report.skipped, 3 * MAX_DRAW_FACTOR)

    def test_replay_matches_batched_draws(self):
        bounds = CorpusBounds(count=4, max_n=5, max_m=8)
        report = run_suite("cut-identity", seed=9, count=4, max_n=5, max_m=8, workers=1)
        replayed = {replay_instance("cut-identity", 9, index, bounds).digest for index in range(4)}
        self.assertEqual(replayed, {check.instance for check in report.checks})
