"""Scene assembly: turn a layout plan into an initialized, trainable scene.

Executes the placement program, decomposes each object's box into regions,
trains the compression codec on the scene's subprompt embeddings, samples
Gaussians into the region boxes, and tags every Gaussian with its region's
compressed embedding.
"""
from __future__ import annotations

import numpy as np

from semsplat.core import init as initializers
from semsplat.core.types import BoundingBox, ObjectModel, Region, Scene
from semsplat.errors import ConfigError
from semsplat.layout.planfile import LayoutPlan
from semsplat.semantic.codec import train_codec


def collect_subprompts(plan: LayoutPlan):
    """Ordered (object_index, region_index, text) triples for the plan."""
    _, regions = plan.execute()
    out = []
    for k, obj in enumerate(plan.objects):
        for l, (text, _box) in enumerate(regions[obj.id]):
            out.append((k, l, text))
    return out


def build_codec(plan, provider, config, scene_prompt=None, seed=0):
    """Train the embedding codec on this scene's subprompt embeddings."""
    texts = [text for _, _, text in collect_subprompts(plan)]
    if scene_prompt:
        texts.append(scene_prompt)
    seen = []
    for text in texts:
        if text not in seen:
            seen.append(text)
    embeddings = np.stack([provider.encode(t) for t in seen])
    return train_codec(
        embeddings,
        epochs=config.epochs,
        seed=seed,
        d_f=config.d_f,
        hidden=config.hidden,
        lr=config.lr,
        attenuation_levels=tuple(config.attenuation_levels),
    )


def build_scene(plan: LayoutPlan, scene_prompt, provider, codec, init_config,
                seed=0) -> Scene:
    transforms, regions_by_id = plan.execute()
    rng = np.random.default_rng(seed)
    objects = []
    for k, planned in enumerate(plan.objects):
        region_list = [
            Region(subprompt=text, box=box) for text, box in regions_by_id[planned.id]
        ]
        region_boxes = [r.box for r in region_list]
        codes = {
            l: codec.encode(provider.encode(r.subprompt))
            for l, r in enumerate(region_list)
        }
        box = region_list[0].box
        for region in region_list[1:]:
            box = box.union(region.box)
        sampler = init_config.sampler
        if sampler == "uniform_box":
            cloud = initializers.sample_uniform_box(
                box, init_config.gaussians_per_object, k, region_boxes,
                lambda l: codes[l], rng, opacity=init_config.opacity,
                scale_factor=init_config.scale_factor,
            )
        elif sampler == "grid_box":
            cloud = initializers.sample_grid_box(
                box, init_config.gaussians_per_object, k, region_boxes,
                lambda l: codes[l], rng, opacity=init_config.opacity,
                scale_factor=init_config.scale_factor,
            )
        elif sampler == "sphere_surface":
            radius = 0.5 * float(np.max(box.extent))
            cloud = initializers.sample_sphere_surface(
                box.center, radius, init_config.gaussians_per_object, k,
                region_boxes, lambda l: codes[l], rng, opacity=init_config.opacity,
            )
        elif sampler == "ellipsoid_surface":
            cloud = initializers.sample_ellipsoid_surface(
                box.center, 0.5 * box.extent, init_config.gaussians_per_object,
                k, region_boxes, lambda l: codes[l], rng,
                opacity=init_config.opacity,
            )
        else:
            raise ConfigError(f"unknown initializer {sampler!r}")
        objects.append(
            ObjectModel(
                id=planned.id,
                prompt=planned.prompt,
                regions=region_list,
                gaussians=cloud,
                transform=transforms[planned.id],
            )
        )
    scene = Scene(objects=objects, prompt=scene_prompt)
    scene.validate()
    return scene
