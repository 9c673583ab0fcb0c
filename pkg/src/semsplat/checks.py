"""Executable verification suites behind `semsplat check`.

Each suite runs the module-level oracles at desk scale and reports
structured pass/fail results; the acceptance tests reuse these entry points
at their full sizes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from semsplat.core.types import BoundingBox, Camera, GaussianCloud
from semsplat.layout.program import LayoutProgram, execute_program
from semsplat.layout.regions import RegionTree, decompose
from semsplat.raster.backward import render_backward
from semsplat.raster.forward import render
from semsplat.raster.reference import render_reference
from semsplat.semantic.maps import MaskSet, SubpromptSet, masks, pool_masks, probabilities


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extras = " ".join(f"{k}={v}" for k, v in self.details.items())
        return f"[{status}] {self.suite}/{self.name} {extras}".rstrip()


def random_cloud(rng, n, d_f=2, spread=1.0, opacity_range=(0.1, 0.9),
                 scale_range=(0.05, 0.3)):
    quats = rng.standard_normal((n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return GaussianCloud(
        means=rng.uniform(-spread, spread, (n, 3)),
        scales=rng.uniform(*scale_range, (n, 3)),
        quats=quats,
        opacities=rng.uniform(*opacity_range, n),
        colors=rng.uniform(0.0, 1.0, (n, 3)),
        semantics=rng.standard_normal((n, d_f)),
        region_ids=np.zeros((n, 2), dtype=np.int64),
    )


def default_camera(size, distance=4.0, fov=0.8, seed=None, rng=None):
    direction = np.array([0.0, 0.0, -1.0])
    if rng is not None:
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
    up = np.array([0.0, 1.0, 0.0])
    if abs(direction @ up) > 0.95:
        up = np.array([1.0, 0.0, 0.0])
    return Camera(
        position=-distance * direction, look_at=np.zeros(3), up=up,
        fov_y=fov, width=size, height=size,
    )


def gradient_check_scene(seed, n_gaussians=20, size=32, rel_tol=1e-3, floor=1e-6,
                         h_rel=1e-4, check_transforms=True):
    """Central finite differences against the analytic backward pass.

    Returns (n_checked, n_passed). Covers every Gaussian parameter and, when
    `check_transforms`, the object transform chain for a two-way split of
    the cloud.
    """
    from semsplat.core.compose import compose_scene, transform_backward
    from semsplat.core.types import ObjectModel, ObjectTransform, Region, Scene
    from semsplat.core import rotations

    rng = np.random.default_rng(seed)
    cam = default_camera(size, distance=3.5 + rng.uniform(0, 1), rng=rng)
    w_color = rng.standard_normal((size, size, 3))

    box = BoundingBox(-np.ones(3), np.ones(3))
    half = n_gaussians // 2
    clouds = [random_cloud(rng, half), random_cloud(rng, n_gaussians - half)]
    transforms = []
    for _ in range(2):
        quat = rng.standard_normal(4)
        quat /= np.linalg.norm(quat)
        transforms.append(
            ObjectTransform(
                scale=float(rng.uniform(0.7, 1.4)),
                rotation=quat,
                translation=rng.uniform(-0.4, 0.4, 3),
            )
        )
    scene = Scene(
        objects=[
            ObjectModel(id=f"o{i}", prompt=f"o{i}",
                        regions=[Region("r", box)], gaussians=clouds[i],
                        transform=transforms[i])
            for i in range(2)
        ],
        prompt="fd scene",
    )

    def loss():
        composed = compose_scene(scene)
        out = render(composed.cloud, cam)
        return float(np.sum(out.color * w_color))

    composed = compose_scene(scene)
    out = render(composed.cloud, cam, retain=True)
    grads = render_backward(out, d_color=w_color)

    analytic = []
    for k, obj in enumerate(scene.objects):
        start, stop = composed.object_slices[k]
        sl = slice(start, stop)
        tg, d_means, d_scales, d_quats = transform_backward(
            obj.gaussians, obj.transform,
            grads.means[sl], grads.scales[sl], grads.quats[sl],
        )
        analytic.append(
            {
                "mean": d_means, "scale": d_scales, "quat": d_quats,
                "opacity": grads.opacities[sl], "color": grads.colors[sl],
                "transform": tg,
            }
        )

    checked = passed = 0

    def compare(a, fd):
        nonlocal checked, passed
        checked += 1
        if abs(fd) < floor and abs(a) < floor:
            passed += 1
            return
        rel = abs(a - fd) / max(abs(a), abs(fd), floor)
        if rel < rel_tol:
            passed += 1

    def fd_param(array, i, a_val):
        orig = array[i]
        h = h_rel * max(abs(orig), 1e-2)
        array[i] = orig + h
        lp = loss()
        array[i] = orig - h
        lm = loss()
        array[i] = orig
        compare(a_val, (lp - lm) / (2 * h))

    for k, obj in enumerate(scene.objects):
        cloud = obj.gaussians
        for name, array in (("mean", cloud.means), ("scale", cloud.scales),
                            ("quat", cloud.quats), ("opacity", cloud.opacities),
                            ("color", cloud.colors)):
            grad_array = analytic[k][name]
            flat = array.reshape(-1)
            gflat = grad_array.reshape(-1)
            for i in range(flat.size):
                fd_param(flat, i, gflat[i])
        if check_transforms:
            tg = analytic[k]["transform"]
            scale_holder = np.array([obj.transform.scale])

            def set_scale(arr=scale_holder, o=obj):
                o.transform.scale = float(arr[0])

            orig = obj.transform.scale
            h = h_rel * max(abs(orig), 1e-2)
            obj.transform.scale = orig + h
            lp = loss()
            obj.transform.scale = orig - h
            lm = loss()
            obj.transform.scale = orig
            compare(tg.scale, (lp - lm) / (2 * h))
            flat = obj.transform.rotation
            for i in range(4):
                fd_param(flat, i, tg.rotation[i])
            flat = obj.transform.translation
            for i in range(3):
                fd_param(flat, i, tg.translation[i])
    return checked, passed


def suite_gradients(scenes=1, seed0=100, threshold=0.95):
    results = []
    t0 = time.time()
    total_checked = total_passed = 0
    for s in range(scenes):
        checked, passed = gradient_check_scene(seed0 + s)
        total_checked += checked
        total_passed += passed
    frac = total_passed / max(total_checked, 1)
    results.append(
        CheckResult(
            suite="gradients",
            name=f"finite_differences_{scenes}_scenes",
            passed=frac >= threshold,
            details={
                "parameters": total_checked,
                "fraction_ok": round(frac, 5),
                "seconds": round(time.time() - t0, 2),
            },
        )
    )
    return results


def suite_compositing(n_scenes=10, max_gaussians=200, max_size=64, seed0=5000,
                      tol=1e-5):
    results = []
    worst = 0.0
    rng = np.random.default_rng(seed0)
    for _ in range(n_scenes):
        n = int(rng.integers(5, max_gaussians + 1))
        size = int(rng.choice([16, 32, max_size]))
        cloud = random_cloud(rng, n, opacity_range=(0.05, 1.0))
        cam = default_camera(size, distance=float(rng.uniform(2.5, 5.0)), rng=rng)
        tiled = render(cloud, cam)
        ref = render_reference(cloud, cam)
        err = max(
            float(np.max(np.abs(tiled.color - ref.color))),
            float(np.max(np.abs(tiled.semantic - ref.semantic))),
            float(np.max(np.abs(tiled.alpha - ref.alpha))),
        )
        worst = max(worst, err)
    results.append(
        CheckResult(
            suite="compositing",
            name=f"tiled_vs_reference_{n_scenes}_scenes",
            passed=worst <= tol,
            details={"worst_linf": f"{worst:.3e}", "tolerance": tol},
        )
    )
    return results


def suite_masks(n_fields=100, seed0=9000):
    rng = np.random.default_rng(seed0)
    partition_violations = 0
    argmax_violations = 0
    dilation_violations = 0
    for _ in range(n_fields):
        m = int(rng.integers(2, 7))
        d_h = 16
        h = w = 32
        q = rng.standard_normal((m, d_h))
        entries = [(0, j, f"p{j}") for j in range(m)]
        s_field = rng.standard_normal((h, w, d_h))
        prompts_hi = SubpromptSet(entries=entries, embeddings=q, tau=0.05)
        prompts_lo = SubpromptSet(entries=entries, embeddings=q, tau=0.005)
        m_hi = masks(probabilities(s_field, prompts_hi), entries)
        m_lo = masks(probabilities(s_field, prompts_lo), entries)
        if not m_hi.partition_ok():
            partition_violations += 1
        if not np.array_equal(m_hi.masks, m_lo.masks):
            argmax_violations += 1
        pooled = pool_masks(m_hi, (8, 8))
        for j in range(m):
            down = (
                m_hi.masks[j].reshape(8, 4, 8, 4).mean(axis=(1, 3)) > 0
            ).astype(np.uint8)
            if np.any(down > pooled.pooled[j]):
                dilation_violations += 1
                break
    total = partition_violations + argmax_violations + dilation_violations
    return [
        CheckResult(
            suite="masks",
            name=f"properties_{n_fields}_fields",
            passed=total == 0,
            details={
                "partition_violations": partition_violations,
                "argmax_violations": argmax_violations,
                "dilation_violations": dilation_violations,
            },
        )
    ]


def fixture_region_trees(count=20, seed=777):
    """Deterministic set of randomized region trees used by the layout suite."""
    rng = np.random.default_rng(seed)

    def random_tree(depth):
        if depth == 0 or rng.uniform() < 0.35:
            return {"subprompt": f"part-{int(rng.integers(1e6))}"}
        n = int(rng.integers(2, 5))
        fractions = rng.uniform(0.2, 1.0, n)
        fractions /= fractions.sum()
        fractions[-1] = 1.0 - float(np.sum(fractions[:-1]))
        return {
            "axis": str(rng.choice(["depth", "width", "length"])),
            "fractions": fractions.tolist(),
            "children": [random_tree(depth - 1) for _ in range(n)],
        }

    out = []
    for _ in range(count):
        box = BoundingBox(rng.uniform(-2, 0, 3), rng.uniform(0.5, 2.5, 3))
        out.append((box, RegionTree.from_dict(random_tree(3))))
    return out


FIVE_OBJECT_PROGRAM = [
    "room_w = 4",
    "table_h = 0.75",
    "table_pos = vec(0, 0, table_h / 2)",
    "lamp_h = 0.5",
    "lamp_pos = table_pos + vec(room_w / 8, -0.2, table_h / 2 + lamp_h / 2)",
    "rug_scale = min(room_w / 2, 3)",
    "chair_x = max(1, room_w / 4) * 1.2",
    "sofa_depth = vec(2, 0.9, 0.8)",
    "place(table, 1, vec(0, 0, 0), table_pos)",
    "place(lamp, 0.5, vec(0, 0, 45), lamp_pos)",
    "place(rug, rug_scale, vec(0, 0, 0), vec(0, 0, 0.01))",
    "place(chair, 1, vec(0, 0, 180), vec(chair_x, 0, 0.45))",
    "place(sofa, 1, vec(0, 0, -90), vec(-1.5, sofa_depth.y, sofa_depth.z / 2))",
]

FIVE_OBJECT_EXPECTED = {
    "table": (1.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.375)),
    "lamp": (0.5, (0.0, 0.0, 45.0), (0.5, -0.2, 1.0)),
    "rug": (2.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.01)),
    "chair": (1.0, (0.0, 0.0, 180.0), (1.2, 0.0, 0.45)),
    "sofa": (1.0, (0.0, 0.0, -90.0), (-1.5, 0.9, 0.4)),
}


def suite_layout(tree_count=20, tree_seed=777, volume_rtol=1e-9,
                 transform_atol=1e-12):
    from semsplat.core import rotations

    results = []
    worst_rel = 0.0
    worst_overlap = 0.0
    for box, tree in fixture_region_trees(tree_count, tree_seed):
        leaves = decompose(box, tree)
        total = sum(b.volume for _, b in leaves)
        worst_rel = max(worst_rel, abs(total - box.volume) / box.volume)
        for i in range(len(leaves)):
            for j in range(i + 1, len(leaves)):
                lo = np.maximum(leaves[i][1].min_corner, leaves[j][1].min_corner)
                hi = np.minimum(leaves[i][1].max_corner, leaves[j][1].max_corner)
                worst_overlap = max(worst_overlap, float(np.prod(np.maximum(hi - lo, 0.0))))
    results.append(
        CheckResult(
            suite="layout",
            name=f"region_tree_volumes_{tree_count}_fixtures",
            passed=worst_rel <= volume_rtol and worst_overlap == 0.0,
            details={"worst_volume_rel": f"{worst_rel:.2e}",
                     "worst_pair_overlap": worst_overlap},
        )
    )

    transforms = execute_program(LayoutProgram.from_list(FIVE_OBJECT_PROGRAM))
    ok = set(transforms) == set(FIVE_OBJECT_EXPECTED)
    worst_err = 0.0
    for oid, (scale, euler, translation) in FIVE_OBJECT_EXPECTED.items():
        xf = transforms[oid]
        expected_quat = rotations.quat_from_euler_xyz_degrees(euler)
        err = max(
            abs(xf.scale - scale),
            float(np.max(np.abs(xf.translation - np.array(translation)))),
            float(1.0 - abs(np.dot(xf.rotation, expected_quat))),
        )
        worst_err = max(worst_err, err)
        ok = ok and err <= transform_atol
    results.append(
        CheckResult(
            suite="layout",
            name="five_object_program_trace",
            passed=ok,
            details={"worst_error": f"{worst_err:.2e}"},
        )
    )
    return results


SUITES = {
    "gradients": suite_gradients,
    "compositing": suite_compositing,
    "masks": suite_masks,
    "layout": suite_layout,
}


def run_suites(names):
    results = []
    for name in names:
        results.extend(SUITES[name]())
    return results
