"""Hierarchical region trees: JSON (de)serialization and box decomposition.

A node is either a leaf {"subprompt": str} or a split
{"axis": "depth"|"width"|"length", "fractions": [...], "children": [...]}.
Axis naming maps depth -> z, width -> x, length -> y. Splits slice the box
along the axis by the given fractions; leaves are emitted depth-first, so
sibling order in the JSON is preserved in the output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from semsplat.core.types import BoundingBox
from semsplat.errors import ValidationError

AXIS_INDEX = {"width": 0, "length": 1, "depth": 2}
FRACTION_TOL = 1e-9


@dataclass
class RegionTree:
    """Validated region-tree node."""

    subprompt: str | None = None
    axis: str | None = None
    fractions: list | None = None
    children: list | None = None

    @property
    def is_leaf(self):
        return self.subprompt is not None

    @classmethod
    def from_dict(cls, node, path="tree"):
        if not isinstance(node, dict):
            raise ValidationError(f"{path}: node must be an object")
        if "subprompt" in node:
            text = node["subprompt"]
            if not isinstance(text, str) or not text.strip():
                raise ValidationError(f"{path}: leaf subprompt must be nonempty")
            return cls(subprompt=text)
        for key in ("axis", "fractions", "children"):
            if key not in node:
                raise ValidationError(f"{path}: split node missing {key!r}")
        axis = node["axis"]
        if axis not in AXIS_INDEX:
            raise ValidationError(
                f"{path}: axis must be one of {sorted(AXIS_INDEX)}, got {axis!r}"
            )
        fractions = [float(f) for f in node["fractions"]]
        if len(fractions) < 2:
            raise ValidationError(f"{path}: a split needs at least two children")
        if any(f <= 0 for f in fractions):
            raise ValidationError(f"{path}: fractions must be positive")
        if abs(sum(fractions) - 1.0) > FRACTION_TOL:
            raise ValidationError(
                f"{path}: fractions sum to {sum(fractions)!r}, expected 1"
            )
        children = node["children"]
        if len(children) != len(fractions):
            raise ValidationError(f"{path}: children/fractions length mismatch")
        parsed = [
            cls.from_dict(child, path=f"{path}.children[{i}]")
            for i, child in enumerate(children)
        ]
        return cls(axis=axis, fractions=fractions, children=parsed)

    def to_dict(self):
        if self.is_leaf:
            return {"subprompt": self.subprompt}
        return {
            "axis": self.axis,
            "fractions": list(self.fractions),
            "children": [c.to_dict() for c in self.children],
        }

    def leaf_count(self):
        if self.is_leaf:
            return 1
        return sum(c.leaf_count() for c in self.children)


def decompose(box: BoundingBox, tree: RegionTree):
    """Split `box` by the tree; returns [(subprompt, BoundingBox)] in DFS order.

    Split edges are computed from cumulative fractions with the final edge
    pinned to the parent's max corner, so adjacent boxes share boundary
    values exactly and the union reproduces the input box.
    """
    if tree.is_leaf:
        return [(tree.subprompt, BoundingBox(box.min_corner.copy(), box.max_corner.copy()))]
    axis = AXIS_INDEX[tree.axis]
    lo = box.min_corner[axis]
    hi = box.max_corner[axis]
    edges = lo + (hi - lo) * np.concatenate([[0.0], np.cumsum(tree.fractions)])
    edges[-1] = hi
    out = []
    for child, e0, e1 in zip(tree.children, edges[:-1], edges[1:]):
        lo_c = box.min_corner.copy()
        hi_c = box.max_corner.copy()
        lo_c[axis] = e0
        hi_c[axis] = e1
        out.extend(decompose(BoundingBox(lo_c, hi_c), child))
    return out
