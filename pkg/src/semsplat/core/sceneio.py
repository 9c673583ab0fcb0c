"""Scene persistence: JSON scene document + SGS1 binary Gaussian payloads.

SGS1 layout (little-endian):
    magic b"SGS1" | u32 count | u32 d_f | u32 reserved
    then count records of f32:
    mean(3) scale(3) quat_wxyz(4) opacity(1) rgb(3) semantic(d_f) region_k(1) region_l(1)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from semsplat.core.types import (
    BoundingBox,
    GaussianCloud,
    ObjectModel,
    ObjectTransform,
    Region,
    Scene,
)
from semsplat.errors import InvalidParameterError

SGS_MAGIC = b"SGS1"


def write_gaussians(path, cloud: GaussianCloud):
    n = len(cloud)
    d_f = cloud.feature_dim
    record = np.concatenate(
        [
            cloud.means,
            cloud.scales,
            cloud.quats,
            cloud.opacities[:, None],
            cloud.colors,
            cloud.semantics,
            cloud.region_ids.astype(np.float64),
        ],
        axis=1,
    ).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(SGS_MAGIC)
        fh.write(struct.pack("<III", n, d_f, 0))
        fh.write(record.tobytes())


def read_gaussians(path) -> GaussianCloud:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SGS_MAGIC:
            raise InvalidParameterError(f"{path}: not an SGS1 file")
        n, d_f, _reserved = struct.unpack("<III", fh.read(12))
        width = 16 + d_f
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != n * width:
        raise InvalidParameterError(f"{path}: truncated Gaussian payload")
    data = data.reshape(n, width).astype(np.float64)
    return GaussianCloud(
        means=data[:, 0:3],
        scales=data[:, 3:6],
        quats=data[:, 6:10],
        opacities=data[:, 10],
        colors=data[:, 11:14],
        semantics=data[:, 14 : 14 + d_f],
        region_ids=np.rint(data[:, 14 + d_f : 16 + d_f]).astype(np.int64),
    )


def save_scene(scene: Scene, json_path, gaussians_dir=None):
    """Write the scene document and one SGS1 file per object next to it."""
    json_path = Path(json_path)
    gdir = Path(gaussians_dir) if gaussians_dir else json_path.parent
    gdir.mkdir(parents=True, exist_ok=True)
    objects = []
    for obj in scene.objects:
        gfile = f"{obj.id}.sgs"
        write_gaussians(gdir / gfile, obj.gaussians)
        objects.append(
            {
                "id": obj.id,
                "prompt": obj.prompt,
                "transform": obj.transform.to_dict(),
                "regions": [
                    {"subprompt": r.subprompt, "box": r.box.to_dict()}
                    for r in obj.regions
                ],
                "gaussians_file": gfile,
            }
        )
    doc = {"scene_prompt": scene.prompt, "objects": objects}
    json_path.parent.mkdir(parents=True, exist_ok=True)
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scene(json_path) -> Scene:
    json_path = Path(json_path)
    with open(json_path) as fh:
        doc = json.load(fh)
    objects = []
    for entry in doc["objects"]:
        cloud = read_gaussians(json_path.parent / entry["gaussians_file"])
        regions = [
            Region(subprompt=r["subprompt"], box=BoundingBox.from_dict(r["box"]))
            for r in entry["regions"]
        ]
        objects.append(
            ObjectModel(
                id=entry["id"],
                prompt=entry["prompt"],
                regions=regions,
                gaussians=cloud,
                transform=ObjectTransform.from_dict(entry["transform"]),
            )
        )
    scene = Scene(objects=objects, prompt=doc["scene_prompt"])
    scene.validate()
    return scene
