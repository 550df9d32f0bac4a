"""End-to-end checks of the rescene command line.

Usage: test_cli.py <rescene binary> <source dir>
"""

import json
import math
import shutil
import struct
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

BINARY = None
SOURCE = None


def run(*args, cwd=None):
    return subprocess.run([BINARY, *map(str, args)], cwd=cwd, capture_output=True, text=True)


def png_size(path):
    data = Path(path).read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n", path
    return struct.unpack(">II", data[16:24])


class SynthRoom(unittest.TestCase):
    """One synthetic room shared by the tests that only read it."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = Path(tempfile.mkdtemp(prefix="rescene_cli_"))
        cls.room = cls.tmp / "room"
        fixture = Path(SOURCE) / "fixtures" / "synthetic_room.json"
        r = run("synth", "gen", "--out", cls.room, "--fixture", fixture)
        assert r.returncode == 0, r.stderr
        r = run("fit", cls.room / "scene.json")
        assert r.returncode == 0, r.stderr
        cls.schema = json.loads((Path(SOURCE) / "schema" / "scene_result.schema.json").read_text())

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)

    def validate(self, doc):
        try:
            import jsonschema
        except ImportError:
            self.skipTest("jsonschema is not installed")
        jsonschema.Draft202012Validator(self.schema).validate(doc)

    def evaluate(self, pred, gt, out, *flags):
        r = run("evaluate", "--pred", pred, "--gt", gt, "--out", out, *flags)
        self.assertEqual(r.returncode, 0, r.stderr)
        return json.loads(Path(out).read_text())

    def test_fit_result_matches_schema_and_gt(self):
        doc = json.loads((self.room / "fit_out" / "scene.json").read_text())
        self.validate(doc)
        self.assertEqual(doc["status"], "ok")
        self.assertEqual(len(doc["objects"]), 4)
        self.assertLessEqual(doc["metrics"]["chamfer"], 5e-3)
        for o in doc["objects"]:
            if o["model"] == "planar4":
                self.assertLessEqual(abs(o["ground_min"]), 1e-6, o["id"])

    def test_evaluate_fit_against_gt(self):
        m = self.evaluate(self.room / "fit_out" / "poses", self.room / "gt", self.tmp / "fit_metrics.json")
        self.assertLessEqual(m["chamfer"], 5e-3)
        self.assertGreaterEqual(m["f_score"], 0.9)
        self.assertLessEqual(m["chamfer"], m["hausdorff"])

    def test_evaluate_swapped_is_symmetric(self):
        pred, gt = self.room / "fit_out" / "poses", self.room / "gt"
        flags = ("--no-icp", "--independent-normalization")
        a = self.evaluate(pred, gt, self.tmp / "ab.json", *flags)
        b = self.evaluate(gt, pred, self.tmp / "ba.json", *flags)
        for key in ("chamfer", "hausdorff", "iou", "f_score"):
            self.assertAlmostEqual(a[key], b[key], delta=1e-12, msg=key)
        self.assertAlmostEqual(a["precision"], b["recall"], delta=1e-12)
        self.assertAlmostEqual(a["recall"], b["precision"], delta=1e-12)

    def test_identical_directories_score_perfectly(self):
        m = self.evaluate(self.room / "gt", self.room / "gt", self.tmp / "same.json")
        self.assertLessEqual(m["chamfer"], 1e-6)
        self.assertEqual(m["f_score"], 1.0)

    def test_missing_mask_exits_2_without_output(self):
        cfg = json.loads((self.room / "scene.json").read_text())
        cfg["objects"][0]["mask"] = "masks/does_not_exist.png"
        cfg["output_dir"] = "bad_out"
        bad = self.room / "bad_scene.json"
        bad.write_text(json.dumps(cfg))
        r = run("fit", bad)
        self.assertEqual(r.returncode, 2)
        self.assertIn("does_not_exist", r.stderr)
        self.assertFalse((self.room / "bad_out").exists())

    def test_truncated_pointmap_is_reported(self):
        work = self.tmp / "truncated"
        shutil.copytree(self.room, work)
        pmap = work / "scene.pmap"
        pmap.write_bytes(pmap.read_bytes()[:-7])
        r = run("fit", work / "scene.json")
        self.assertEqual(r.returncode, 2)
        self.assertIn("TruncatedPayload", r.stderr)

    def test_stencil_then_plane_finds_floor(self):
        ply = self.tmp / "floor.ply"
        r = run("stencil", "--pointmap", self.room / "scene.pmap", "--mask", self.room / "masks" / "floor.png",
                "--out", ply)
        self.assertEqual(r.returncode, 0, r.stderr)
        plane_json = self.tmp / "plane.json"
        r = run("plane", "--cloud", ply, "--out", plane_json)
        self.assertEqual(r.returncode, 0, r.stderr)
        normal = json.loads(plane_json.read_text())["normal"]
        angle = math.degrees(math.acos(min(1.0, abs(normal[1]) / math.sqrt(sum(c * c for c in normal)))))
        self.assertLess(angle, 1.0)

    def test_render_and_aq_outputs(self):
        cam = json.loads((self.room / "scene.json").read_text())["camera"]
        sil = self.tmp / "sil.png"
        r = run("render-sil", "--mesh", self.room / "gt" / "table.obj", "--camera", self.room / "scene.json",
                "--out", sil, "--hard")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(png_size(sil), (cam["width"], cam["height"]))
        query = self.tmp / "query.png"
        r = run("aq-build", "--image", self.room / "image.png", "--mask", self.room / "masks" / "table.png",
                "--out", query)
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(png_size(query), (1536, 768))
        crop = self.tmp / "crop.png"
        r = run("aq-build", "--parse", query, "--out", crop)
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertEqual(png_size(crop), (704, 704))
        r = run("aq-build", "--parse", sil, "--out", self.tmp / "bad_crop.png")
        self.assertEqual(r.returncode, 2)
        self.assertIn("SizeMismatch", r.stderr)


class Pipeline(unittest.TestCase):
    def test_run_rerun_and_schema(self):
        tmp = Path(tempfile.mkdtemp(prefix="rescene_cli_pipe_"))
        try:
            room = tmp / "room"
            self.assertEqual(run("synth", "gen", "--out", room).returncode, 0)
            r = run("pipeline", "run", room / "pipeline.json")
            self.assertEqual(r.returncode, 0, r.stderr)
            scene = room / "work" / "scene.json"
            first = scene.read_bytes()
            report = json.loads((room / "work" / "report.json").read_text())
            self.assertGreater(sum(report["service_calls"].values()), 0)
            r = run("pipeline", "run", room / "pipeline.json")
            self.assertEqual(r.returncode, 0, r.stderr)
            report = json.loads((room / "work" / "report.json").read_text())
            self.assertEqual(sum(report["service_calls"].values()), 0)
            self.assertTrue(all(v == "cached" for v in report["stages"].values()))
            self.assertEqual(scene.read_bytes(), first)
            doc = json.loads(first)
            self.assertLessEqual(doc["metrics"]["chamfer"], 5e-3)
            try:
                import jsonschema
            except ImportError:
                return
            schema = json.loads((Path(SOURCE) / "schema" / "scene_result.schema.json").read_text())
            jsonschema.Draft202012Validator(schema).validate(doc)
        finally:
            shutil.rmtree(tmp, ignore_errors=True)


class Usage(unittest.TestCase):
    def test_usage_errors_exit_2(self):
        for args in ([], ["bogus"], ["evaluate", "--pred", "."], ["fit"], ["synth", "gen"],
                     ["fit", "/nonexistent/scene.json"], ["render-sil", "--sigma", "-1"]):
            self.assertEqual(run(*args).returncode, 2, args)

    def test_help_exits_0(self):
        r = run("--help")
        self.assertEqual(r.returncode, 0)
        for cmd in ("fit", "evaluate", "pipeline", "synth", "aq-build", "render-sil", "stencil", "plane"):
            self.assertIn(cmd, r.stdout)


if __name__ == "__main__":
    if len(sys.argv) < 3:
        sys.exit("usage: test_cli.py <rescene binary> <source dir>")
    BINARY, SOURCE = sys.argv[1], sys.argv[2]
    unittest.main(argv=sys.argv[:1], verbosity=2)
