import json
from pathlib import Path

import numpy as np
import pytest

from semsplat.cli import main
from semsplat.core import sceneio

PLAN_DOC = {
    "objects": [
        {"id": "crate", "prompt": "a crate", "size_estimate": [1, 1, 1]},
        {"id": "ball", "prompt": "a ball", "size_estimate": [0.6, 0.6, 0.6]},
    ],
    "program": [
        "place(crate, 1, vec(0, 0, 0), vec(-0.7, 0, 0.5))",
        "place(ball, 1, vec(0, 0, 0), vec(0.7, 0, 0.3))",
    ],
    "region_trees": {
        "crate": {"axis": "width", "fractions": [0.5, 0.5],
                  "children": [{"subprompt": "red panel"}, {"subprompt": "green panel"}]},
        "ball": {"subprompt": "a plain ball"},
    },
}

TARGETS = {
    "red panel": [0.9, 0.1, 0.1],
    "green panel": [0.1, 0.9, 0.1],
    "a plain ball": [0.2, 0.2, 0.7],
    "demo scene": [0.0, 0.0, 0.0],
}

SMALL_CONFIG = {
    "iterations": 2,
    "seed": 4,
    "render_size": 32,
    "codec": {"d_h": 32, "d_f": 4, "hidden": 32, "epochs": 80},
    "init": {"gaussians_per_object": 25, "opacity": 0.9},
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "plan.json").write_text(json.dumps(PLAN_DOC, indent=1))
    (tmp_path / "targets.json").write_text(json.dumps(TARGETS))
    (tmp_path / "config.json").write_text(json.dumps(SMALL_CONFIG))
    return tmp_path


def train_args(workdir, out, extra=()):
    return [
        "train", "--plan", str(workdir / "plan.json"),
        "--config", str(workdir / "config.json"),
        "--targets", str(workdir / "targets.json"),
        "--prompt", "demo scene",
        "--out", str(out),
        *extra,
    ]


class TestPlanCommand:
    def test_canned_plan_deterministic(self, workdir):
        out1, out2 = workdir / "p1.json", workdir / "p2.json"
        for out in (out1, out2):
            code = main(["plan", "--prompt", "whatever", "--planner", "canned",
                         "--fixture", str(workdir / "plan.json"), "--out", str(out)])
            assert code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_invalid_fractions_exit_2(self, workdir, capsys):
        bad = json.loads(json.dumps(PLAN_DOC))
        bad["region_trees"]["crate"]["fractions"] = [0.6, 0.6]
        (workdir / "bad.json").write_text(json.dumps(bad))
        code = main(["plan", "--prompt", "x", "--planner", "canned",
                     "--fixture", str(workdir / "bad.json"),
                     "--out", str(workdir / "out.json")])
        assert code == 2
        err = capsys.readouterr().err
        assert "region_trees[crate]" in err

    def test_remote_without_key_exit_3(self, workdir, monkeypatch):
        monkeypatch.delenv("PLANNER_API_KEY", raising=False)
        code = main(["plan", "--prompt", "x", "--planner", "remote",
                     "--endpoint", "http://example.invalid",
                     "--out", str(workdir / "out.json")])
        assert code == 3

    def test_validate_command(self, workdir):
        assert main(["validate", str(workdir / "plan.json")]) == 0


class TestTrainCommand:
    def test_zero_iterations_checkpoint_equals_initialization(self, workdir):
        out = workdir / "run0"
        code = main(train_args(workdir, out, extra=["--iterations", "0"]))
        assert code == 0
        saved = sceneio.load_scene(out / "scene.json")

        from semsplat.layout.planfile import LayoutPlan
        from semsplat.optim.config import TrainConfig
        from semsplat.pipeline import build_codec, build_scene
        from semsplat.semantic import PseudoEmbeddingProvider

        config = TrainConfig.from_dict(SMALL_CONFIG)
        provider = PseudoEmbeddingProvider(d_h=config.codec.d_h, seed=config.seed)
        plan = LayoutPlan.from_dict(PLAN_DOC)
        codec = build_codec(plan, provider, config.codec, scene_prompt="demo scene",
                            seed=config.seed)
        scene = build_scene(plan, "demo scene", provider, codec, config.init,
                            seed=config.seed)
        for a, b in zip(saved.objects, scene.objects):
            assert np.allclose(a.gaussians.means, b.gaussians.means, atol=1e-6)
            assert np.allclose(a.gaussians.colors, b.gaussians.colors, atol=1e-6)

    def test_train_writes_artifacts_and_metrics(self, workdir):
        out = workdir / "run"
        assert main(train_args(workdir, out)) == 0
        assert (out / "scene.json").exists()
        assert (out / "codec.aec").exists()
        assert (out / "config.json").exists()
        lines = [json.loads(l) for l in (out / "metrics.jsonl").read_text().splitlines()]
        assert [l["step"] for l in lines] == [0, 1]
        assert (out / "turntable" / "view_00.png").exists()
        assert len(list((out / "turntable").glob("view_*.png"))) == 8

    def test_resume_continues_step_counter(self, workdir):
        out = workdir / "run"
        assert main(train_args(workdir, out)) == 0
        code = main([
            "train", "--resume", str(out), "--out", str(out),
            "--targets", str(workdir / "targets.json"),
        ])
        assert code == 0
        lines = [json.loads(l) for l in (out / "metrics.jsonl").read_text().splitlines()]
        assert [l["step"] for l in lines] == [0, 1, 2, 3]

    def test_missing_targets_exit_3(self, workdir):
        code = main([
            "train", "--plan", str(workdir / "plan.json"),
            "--config", str(workdir / "config.json"),
            "--out", str(workdir / "x"),
        ])
        assert code == 3


class TestRenderCommand:
    def test_turntable_from_checkpoint(self, workdir):
        out = workdir / "run"
        assert main(train_args(workdir, out)) == 0
        views = workdir / "views"
        code = main(["render", "--checkpoint", str(out), "--out", str(views),
                     "--views", "4", "--size", "24", "--float-dumps"])
        assert code == 0
        assert len(list(views.glob("view_*.png"))) == 4
        assert len(list(views.glob("view_*.img"))) == 4


class TestCheckCommand:
    def test_masks_suite_passes(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(["check", "--suite", "masks", "--report", str(report)])
        assert code == 0
        assert "[PASS] masks" in capsys.readouterr().out
        doc = json.loads(report.read_text())
        assert doc[0]["passed"] is True

    def test_layout_suite_passes(self, capsys):
        assert main(["check", "--suite", "layout"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 2
