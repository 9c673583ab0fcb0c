"""Scene-layout diagnostics: pairwise oriented-box overlap and surface gaps.

Each object's layout box is carried into the scene by its transform, giving
an oriented bounding box. Overlap volumes come from an exact halfspace
intersection (Chebyshev-center feasibility + convex hull); gaps from a
box-constrained nearest-point minimization between the two boxes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, HalfspaceIntersection

DEFAULT_OVERLAP_FRACTION = 0.05
DEFAULT_GAP_THRESHOLD = 2.0


@dataclass
class OrientedBox:
    center: np.ndarray
    axes: np.ndarray  # 3x3 rotation, columns are box axes
    half_extents: np.ndarray

    @classmethod
    def from_object(cls, obj):
        box = obj.box
        xf = obj.transform
        rot = xf.matrix
        return cls(
            center=xf.apply_points(box.center.reshape(1, 3))[0],
            axes=rot,
            half_extents=xf.scale * 0.5 * box.extent,
        )

    def halfspaces(self):
        """Rows [a, b] with a.x + b <= 0 describing the box interior."""
        rows = []
        for j in range(3):
            axis = self.axes[:, j]
            offset = axis @ self.center
            rows.append(np.concatenate([axis, [-(offset + self.half_extents[j])]]))
            rows.append(np.concatenate([-axis, [offset - self.half_extents[j]]]))
        return np.array(rows)

    @property
    def volume(self):
        return float(np.prod(2.0 * self.half_extents))

    def support_point(self, u):
        """Point of the box at local coordinates u in [-1, 1]^3."""
        return self.center + self.axes @ (self.half_extents * u)


def obb_overlap_volume(a: OrientedBox, b: OrientedBox):
    halfspaces = np.vstack([a.halfspaces(), b.halfspaces()])
    # Chebyshev center: maximize r s.t. a.x + |a| r + b <= 0
    norms = np.linalg.norm(halfspaces[:, :3], axis=1, keepdims=True)
    res = linprog(
        c=np.array([0.0, 0.0, 0.0, -1.0]),
        A_ub=np.hstack([halfspaces[:, :3], norms]),
        b_ub=-halfspaces[:, 3],
        bounds=[(None, None)] * 3 + [(0, None)],
        method="highs",
    )
    if not res.success or res.x[3] < 1e-12:
        return 0.0
    interior = res.x[:3]
    hs = HalfspaceIntersection(halfspaces, interior)
    return float(ConvexHull(hs.intersections).volume)


def obb_gap_distance(a: OrientedBox, b: OrientedBox):
    """Distance between the two boxes' surfaces (0 when they intersect)."""

    def objective(u):
        pa = a.support_point(u[:3])
        pb = b.support_point(u[3:])
        diff = pa - pb
        grad_a = a.axes.T @ diff * a.half_extents
        grad_b = -(b.axes.T @ diff) * b.half_extents
        return 0.5 * float(diff @ diff), np.concatenate([grad_a, grad_b])

    best = None
    for start in ([0.0] * 6, [0.5] * 6, [-0.5] * 6):
        res = minimize(
            objective, np.array(start), jac=True, method="L-BFGS-B",
            bounds=[(-1.0, 1.0)] * 6,
        )
        if best is None or res.fun < best:
            best = res.fun
    return float(np.sqrt(max(2.0 * best, 0.0)))


@dataclass
class PairReport:
    ids: tuple
    overlap_volume: float
    overlap_fraction: float  # of the smaller box
    gap_distance: float
    flags: list = field(default_factory=list)


@dataclass
class LayoutReport:
    pairs: list

    @property
    def flagged(self):
        return [p for p in self.pairs if p.flags]

    def to_dict(self):
        return {
            "pairs": [
                {
                    "ids": list(p.ids),
                    "overlap_volume": p.overlap_volume,
                    "overlap_fraction": p.overlap_fraction,
                    "gap_distance": p.gap_distance,
                    "flags": p.flags,
                }
                for p in self.pairs
            ]
        }


def validate_layout(scene, overlap_fraction=DEFAULT_OVERLAP_FRACTION,
                    gap_threshold=DEFAULT_GAP_THRESHOLD) -> LayoutReport:
    boxes = [(obj.id, OrientedBox.from_object(obj)) for obj in scene.objects]
    pairs = []
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            id_a, box_a = boxes[i]
            id_b, box_b = boxes[j]
            volume = obb_overlap_volume(box_a, box_b)
            fraction = volume / min(box_a.volume, box_b.volume)
            gap = obb_gap_distance(box_a, box_b) if volume == 0.0 else 0.0
            flags = []
            if fraction > overlap_fraction:
                flags.append("overlap")
            if gap > gap_threshold:
                flags.append("gap")
            pairs.append(
                PairReport(
                    ids=(id_a, id_b),
                    overlap_volume=volume,
                    overlap_fraction=fraction,
                    gap_distance=gap,
                    flags=flags,
                )
            )
    return LayoutReport(pairs=pairs)
