"""Layout-plan documents: parsing, validation, serialization.

A plan carries everything needed to instantiate a scene skeleton:
objects with prompts and size estimates, the placement program, and one
region tree per object.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from semsplat.core.types import BoundingBox
from semsplat.errors import ValidationError
from semsplat.layout.program import LayoutProgram, execute_program
from semsplat.layout.regions import RegionTree, decompose


@dataclass
class PlannedObject:
    id: str
    prompt: str
    size_estimate: np.ndarray  # full extents (x, y, z) in local units

    def local_box(self):
        half = 0.5 * self.size_estimate
        return BoundingBox(-half, half)


@dataclass
class LayoutPlan:
    objects: list  # [PlannedObject]
    program: LayoutProgram
    region_trees: dict  # id -> RegionTree

    def to_dict(self):
        return {
            "objects": [
                {
                    "id": o.id,
                    "prompt": o.prompt,
                    "size_estimate": o.size_estimate.tolist(),
                }
                for o in self.objects
            ],
            "program": self.program.to_list(),
            "region_trees": {k: v.to_dict() for k, v in self.region_trees.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        for key in ("objects", "program", "region_trees"):
            if key not in doc:
                raise ValidationError(f"plan missing {key!r}")
        objects = []
        seen = set()
        for entry in doc["objects"]:
            oid = entry["id"]
            if oid in seen:
                raise ValidationError(f"duplicate object id {oid!r} in plan")
            seen.add(oid)
            size = np.asarray(entry["size_estimate"], dtype=np.float64)
            if size.shape != (3,) or np.any(size <= 0):
                raise ValidationError(
                    f"object {oid!r}: size_estimate must be three positive numbers"
                )
            objects.append(PlannedObject(id=oid, prompt=entry["prompt"], size_estimate=size))
        trees = {}
        for oid, node in doc["region_trees"].items():
            if oid not in seen:
                raise ValidationError(f"region tree for unknown object {oid!r}")
            trees[oid] = RegionTree.from_dict(node, path=f"region_trees[{oid}]")
        return cls(
            objects=objects,
            program=LayoutProgram.from_list(doc["program"]),
            region_trees=trees,
        )

    def execute(self):
        """Run the program and region trees.

        Returns (transforms: id -> ObjectTransform,
                 regions: id -> [(subprompt, BoundingBox)]).
        """
        transforms = execute_program(self.program)
        missing = [o.id for o in self.objects if o.id not in transforms]
        if missing:
            raise ValidationError(f"program never places objects {missing!r}")
        extra = [oid for oid in transforms if oid not in {o.id for o in self.objects}]
        if extra:
            raise ValidationError(f"program places unknown objects {extra!r}")
        regions = {}
        for obj in self.objects:
            tree = self.region_trees.get(obj.id)
            if tree is None:
                # objects without a tree get a single whole-box region
                regions[obj.id] = [(obj.prompt, obj.local_box())]
            else:
                regions[obj.id] = decompose(obj.local_box(), tree)
        return transforms, regions


def load_plan(path) -> LayoutPlan:
    with open(path) as fh:
        doc = json.load(fh)
    return LayoutPlan.from_dict(doc)


def save_plan(plan: LayoutPlan, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(plan.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
