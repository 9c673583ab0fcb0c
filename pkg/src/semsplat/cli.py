"""Command-line operator surface.

Subcommands: plan (run a planner client), validate (check a plan file),
train (optimize a scene), render (turntable previews from a checkpoint),
check (executable verification suites).

Exit codes: 0 success, 1 runtime failure, 2 validation failure,
3 configuration/environment failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from semsplat import errors
from semsplat.core import sceneio
from semsplat.core.compose import compose_scene
from semsplat.core.types import Camera

GUIDANCE_URL_ENV = "GUIDANCE_URL"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_CONFIG = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="semsplat",
        description="Compositional Gaussian-splatting scene generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="produce a layout plan")
    p_plan.add_argument("--prompt", required=True)
    p_plan.add_argument("--planner", choices=["canned", "remote"], default="canned")
    p_plan.add_argument("--fixture", help="fixture plan file for the canned planner")
    p_plan.add_argument("--endpoint", help="chat-completion endpoint for remote")
    p_plan.add_argument("--model", default="gpt-4")
    p_plan.add_argument("--out", required=True)

    p_val = sub.add_parser("validate", help="validate a plan file")
    p_val.add_argument("plan")
    p_val.add_argument("--report", help="write the JSON report here")

    p_train = sub.add_parser("train", help="optimize a scene from a plan")
    p_train.add_argument("--plan", help="plan file (omit when resuming)")
    p_train.add_argument("--prompt", default="scene",
                         help="scene-level prompt (drives the background score)")
    p_train.add_argument("--config", help="config JSON file")
    p_train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="dotted-path config override (repeatable)")
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--iterations", type=int)
    p_train.add_argument("--oracle", choices=["analytic", "remote", "recorded"],
                         default="analytic")
    p_train.add_argument("--targets", help="JSON {prompt: [r,g,b]} for analytic")
    p_train.add_argument("--fixtures", help="recorded-oracle fixture file")
    p_train.add_argument("--resume", help="checkpoint directory to continue from")

    p_render = sub.add_parser("render", help="turntable renders from a checkpoint")
    p_render.add_argument("--checkpoint", required=True)
    p_render.add_argument("--out", required=True)
    p_render.add_argument("--views", type=int, default=8)
    p_render.add_argument("--size", type=int, default=256)
    p_render.add_argument("--elevation-deg", type=float, default=20.0)
    p_render.add_argument("--float-dumps", action="store_true",
                          help="also write lossless IMG1 files")

    p_check = sub.add_parser("check", help="run verification suites")
    p_check.add_argument("--suite", choices=["gradients", "compositing", "masks",
                                             "layout", "all"], default="all")
    p_check.add_argument("--report", help="write the JSON report here")
    return parser


def cmd_plan(args):
    from semsplat.layout.planner import CannedPlannerClient, RemotePlannerClient
    from semsplat.layout.planfile import save_plan

    if args.planner == "canned":
        if not args.fixture:
            raise errors.ConfigError("canned planner needs --fixture")
        client = CannedPlannerClient(args.fixture)
    else:
        if not args.endpoint:
            raise errors.ConfigError("remote planner needs --endpoint")
        client = RemotePlannerClient(endpoint=args.endpoint, model=args.model)
    plan = client.plan(args.prompt)
    save_plan(plan, args.out)
    report = _plan_report(plan)
    print(json.dumps(report, indent=2, sort_keys=True))
    print(f"plan written to {args.out}")
    return EXIT_OK


def _plan_report(plan):
    transforms, regions = plan.execute()
    report = {
        "objects": {},
        "layout": None,
    }
    for obj in plan.objects:
        leaves = regions[obj.id]
        report["objects"][obj.id] = {
            "regions": [text for text, _ in leaves],
            "region_volumes": [round(box.volume, 9) for _, box in leaves],
        }
    report["layout"] = _layout_report_from_plan(plan, transforms, regions)
    return report


def _layout_report_from_plan(plan, transforms, regions):
    from semsplat.core.types import GaussianCloud, ObjectModel, Region, Scene
    from semsplat.layout.validate import validate_layout

    objects = []
    for obj in plan.objects:
        placeholder = GaussianCloud(
            means=np.zeros((1, 3)), scales=np.full((1, 3), 1e-3),
            quats=np.array([[1.0, 0, 0, 0]]), opacities=np.array([1.0]),
            colors=np.full((1, 3), 0.5), semantics=np.zeros((1, 1)),
            region_ids=np.zeros((1, 2), dtype=np.int64),
        )
        objects.append(
            ObjectModel(
                id=obj.id, prompt=obj.prompt,
                regions=[Region(t, b) for t, b in regions[obj.id]],
                gaussians=placeholder, transform=transforms[obj.id],
            )
        )
    scene = Scene(objects=objects, prompt="plan validation")
    if len(objects) < 2:
        return {"pairs": []}
    return validate_layout(scene).to_dict()


def cmd_validate(args):
    from semsplat.layout.planfile import load_plan

    plan = load_plan(args.plan)
    report = _plan_report(plan)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    flagged = report["layout"]["pairs"] and any(
        p["flags"] for p in report["layout"]["pairs"]
    )
    print("layout flags present" if flagged else "plan valid")
    return EXIT_OK


def _build_oracle(args, config):
    from semsplat.guidance.oracles import AnalyticOracle, RecordedOracle, RemoteOracle
    from semsplat.guidance.schedule import NoiseSchedule

    schedule_args = dict(
        total_steps=config.schedule.total_steps,
        beta_start=config.schedule.beta_start,
        beta_end=config.schedule.beta_end,
        weighting=config.schedule.weighting,
    )
    if args.oracle == "analytic":
        if not args.targets:
            raise errors.ConfigError("analytic oracle needs --targets JSON file")
        with open(args.targets) as fh:
            targets = {k: np.asarray(v, dtype=np.float64) for k, v in json.load(fh).items()}
        return AnalyticOracle(targets, NoiseSchedule(**schedule_args))
    if args.oracle == "recorded":
        if not args.fixtures:
            raise errors.ConfigError("recorded oracle needs --fixtures file")
        return RecordedOracle.load(args.fixtures)
    url = os.environ.get(GUIDANCE_URL_ENV)
    if not url:
        raise errors.ConfigError(
            f"remote oracle needs the {GUIDANCE_URL_ENV} environment variable"
        )
    return RemoteOracle(url)


def _build_provider(args, config):
    from semsplat.semantic.providers import (
        PseudoEmbeddingProvider,
        RemoteEmbeddingProvider,
    )

    if args.oracle == "remote":
        url = os.environ.get(GUIDANCE_URL_ENV)
        if not url:
            raise errors.ConfigError(
                f"remote oracle needs the {GUIDANCE_URL_ENV} environment variable"
            )
        return RemoteEmbeddingProvider(url)
    return PseudoEmbeddingProvider(d_h=config.codec.d_h, seed=config.seed)


def cmd_train(args):
    from semsplat.layout.planfile import load_plan
    from semsplat.optim.checkpoint import load_checkpoint, save_checkpoint
    from semsplat.optim.config import TrainConfig, load_config
    from semsplat.optim.train import Trainer
    from semsplat.pipeline import build_codec, build_scene

    if args.resume:
        with open(Path(args.resume) / "config.json") as fh:
            config = TrainConfig.from_dict(json.load(fh))
    else:
        config = load_config(args.config) if args.config else TrainConfig()
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.iterations is not None:
        overrides.append(f"iterations={args.iterations}")
    if overrides:
        config = config.apply_overrides(overrides)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle = _build_oracle(args, config)
    provider = _build_provider(args, config)

    if args.resume:
        trainer = load_checkpoint(args.resume, provider, oracle, config=config)
        remaining = trainer.config.iterations
        metrics_mode = "a"
    else:
        if not args.plan:
            raise errors.ConfigError("train needs --plan (or --resume)")
        plan = load_plan(args.plan)
        scene_prompt = args.prompt
        codec = build_codec(plan, provider, config.codec, scene_prompt=scene_prompt,
                            seed=config.seed)
        scene = build_scene(plan, scene_prompt, provider, codec, config.init,
                            seed=config.seed)
        trainer = Trainer(scene, codec, provider, oracle, config)
        remaining = config.iterations
        metrics_mode = "w"

    metrics_path = out_dir / "metrics.jsonl"
    interval = trainer.config.preview_interval
    with open(metrics_path, metrics_mode) as fh:
        done = 0
        while done < remaining:
            chunk = remaining - done
            if interval:
                chunk = min(chunk, interval)
            trainer.run(chunk, metrics_fh=fh)
            done += chunk
            if interval and done < remaining:
                _write_turntable(trainer.current_scene(),
                                 out_dir / f"preview_{trainer.step_index:06d}",
                                 views=8, size=trainer.config.render_size,
                                 elevation_deg=20.0, float_dumps=False)
    save_checkpoint(out_dir, trainer)
    _write_turntable(trainer.current_scene(), out_dir / "turntable", views=8,
                     size=trainer.config.render_size, elevation_deg=20.0,
                     float_dumps=False)
    summary = trainer.metrics[-1] if trainer.metrics else {"step": trainer.step_index}
    print(json.dumps(summary, sort_keys=True))
    print(f"checkpoint written to {out_dir}")
    return EXIT_OK


def _write_turntable(scene, out_dir, views, size, elevation_deg, float_dumps):
    from semsplat.raster.forward import render
    from semsplat.raster.imageio import write_float_image, write_png

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    center = scene.center()
    distance = 2.2 * max(scene.extent(), 1e-3)
    elevation = np.radians(elevation_deg)
    composed = compose_scene(scene)
    for v in range(views):
        azimuth = 2.0 * np.pi * v / views
        offset = distance * np.array(
            [np.cos(elevation) * np.cos(azimuth),
             np.cos(elevation) * np.sin(azimuth),
             np.sin(elevation)]
        )
        camera = Camera(
            position=center + offset, look_at=center, up=np.array([0.0, 0.0, 1.0]),
            fov_y=np.radians(49.0), width=size, height=size,
        )
        out = render(composed.cloud, camera)
        write_png(out_dir / f"view_{v:02d}.png", out.color)
        if float_dumps:
            write_float_image(out_dir / f"view_{v:02d}.img", out.color)


def cmd_render(args):
    scene = sceneio.load_scene(Path(args.checkpoint) / "scene.json")
    _write_turntable(scene, args.out, views=args.views, size=args.size,
                     elevation_deg=args.elevation_deg, float_dumps=args.float_dumps)
    print(f"{args.views} views written to {args.out}")
    return EXIT_OK


def cmd_check(args):
    from semsplat.checks import SUITES, run_suites

    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = run_suites(names)
    for result in results:
        print(result.line())
    if args.report:
        doc = [
            {"suite": r.suite, "name": r.name, "passed": r.passed, "details": r.details}
            for r in results
        ]
        Path(args.report).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {
    "plan": cmd_plan,
    "validate": cmd_validate,
    "train": cmd_train,
    "render": cmd_render,
    "check": cmd_check,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (errors.ValidationError,) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (errors.ConfigError,) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except errors.SemsplatError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
