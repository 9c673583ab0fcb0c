"""Alternating local/global optimization driven by mask-composed scores.

One step: sample a camera (single object in local coordinates on local
steps; the whole scene or an object pair on global steps), splat color and
semantic maps, decode the semantic map, derive subprompt masks, pool them to
the oracle grid, compose the per-subprompt noise predictions under those
masks, and push the weighted residual back through the rasterizer into the
Gaussian parameters (plus the object transforms on global steps).
Densify/compactness/prune passes run on their configured intervals. The
whole loop is deterministic for a fixed seed and a deterministic oracle.
"""
from __future__ import annotations

import json

import numpy as np

from semsplat.core.compose import compose_scene, transform_backward
from semsplat.core.types import ObjectModel, Scene
from semsplat.errors import ConfigError
from semsplat.guidance.compose import semantic_sds_grad
from semsplat.guidance.schedule import NoiseSchedule
from semsplat.optim.cameras import sample_camera, select_view_descriptor
from semsplat.optim.config import TrainConfig
from semsplat.optim.density import compactness_object, densify_object, prune_object
from semsplat.optim.state import ObjectState
from semsplat.raster.backward import render_backward
from semsplat.raster.forward import render
from semsplat.semantic.maps import (
    SubpromptSet,
    apply_background,
    decode_map,
    masks,
    pool_masks,
    probabilities,
)


class Trainer:
    def __init__(self, scene: Scene, codec, provider, oracle, config: TrainConfig):
        scene.validate()
        self.config = config
        self.codec = codec
        self.oracle = oracle
        self.scene_prompt = scene.prompt
        self.states = [ObjectState(obj, config.lr) for obj in scene.objects]
        self.schedule = NoiseSchedule(
            total_steps=config.schedule.total_steps,
            beta_start=config.schedule.beta_start,
            beta_end=config.schedule.beta_end,
            weighting=config.schedule.weighting,
        )
        self.rng = np.random.default_rng(config.seed)
        self.step_index = 0
        self.metrics = []
        self._embedding = {}
        for k, obj in enumerate(scene.objects):
            for l, region in enumerate(obj.regions):
                self._embedding[(k, l)] = np.asarray(
                    provider.encode(region.subprompt), dtype=np.float64
                )
        size = config.render_size
        resolution = getattr(oracle, "resolution", None)
        if resolution is not None and tuple(resolution) != (size, size):
            raise ConfigError(
                f"oracle operates on a {resolution} grid but renders are "
                f"{size}x{size}; latent-space guidance must match the render "
                "size (the pixel<->latent transport is the service's concern)"
            )

    # -- scene views -------------------------------------------------------

    def current_scene(self) -> Scene:
        objects = [
            ObjectModel(
                id=s.object_id, prompt=s.prompt, regions=s.regions,
                gaussians=s.cloud(), transform=s.transform(),
            )
            for s in self.states
        ]
        return Scene(objects=objects, prompt=self.scene_prompt)

    # -- alternation bookkeeping -------------------------------------------

    def _mode(self, step):
        ratio = self.config.local_steps + self.config.global_steps
        pos = step % ratio
        blocks = step // ratio
        if pos < self.config.local_steps:
            local_count = blocks * self.config.local_steps + pos
            k = local_count % len(self.states)
            return ("object", k)
        global_count = blocks * self.config.global_steps + (
            pos - self.config.local_steps
        )
        if len(self.states) < 2 or global_count % 2 == 0:
            return ("scene",)
        i, j = sorted(
            self.rng.choice(len(self.states), size=2, replace=False).tolist()
        )
        return ("pair", i, j)

    # -- one optimization step ----------------------------------------------

    def step(self):
        config = self.config
        scene = self.current_scene()
        mode = self._mode(self.step_index)
        camera = sample_camera(mode, scene, config.camera, self.rng,
                               config.render_size)

        if mode[0] == "object":
            k = mode[1]
            rendered = [k]
            cloud = self.states[k].cloud()
            slices = {k: (0, len(cloud))}
            centers = {k: scene.objects[k].box.center}
            local_step = True
        else:
            subset = None if mode[0] == "scene" else [
                self.states[mode[1]].object_id, self.states[mode[2]].object_id
            ]
            composed = compose_scene(scene, subset)
            cloud = composed.cloud
            rendered = composed.object_order
            slices = composed.object_slices
            centers = {k: scene.objects[k].center_global() for k in rendered}
            local_step = False

        out = render(cloud, camera, retain=True)

        entries = []
        embeddings = []
        for k in rendered:
            for l, region in enumerate(scene.objects[k].regions):
                entries.append((k, l, region.subprompt))
                embeddings.append(self._embedding[(k, l)])
        prompts = SubpromptSet(
            entries=entries, embeddings=np.stack(embeddings), tau=config.tau
        )
        semantic_map = decode_map(out.semantic.astype(np.float32), self.codec)
        prob = probabilities(semantic_map, prompts)
        mask_set = apply_background(
            masks(prob, entries), out.alpha, config.background_alpha
        )
        partition_ok = mask_set.partition_ok()
        resolution = getattr(self.oracle, "resolution", None)
        latent_hw = tuple(resolution) if resolution else out.color.shape[:2]
        pooled = pool_masks(mask_set, latent_hw)

        descriptors = {
            k: select_view_descriptor(
                camera.position, centers[k],
                overhead_elevation_deg=config.view.overhead_elevation_deg,
                front_back_azimuth_deg=config.view.front_back_azimuth_deg,
            )
            for k in rendered
        }

        t = int(self.rng.integers(config.schedule.t_min, config.schedule.t_max + 1))
        epsilon = self.rng.standard_normal(out.color.shape)
        sds = semantic_sds_grad(
            out.color, entries, pooled.pooled, self.oracle, self.schedule, t,
            epsilon, view_descriptors=descriptors,
            null_prompt=self.scene_prompt, null_mask=pooled.pooled_null,
        )

        grads = render_backward(out, d_color=sds.grad)

        for k in rendered:
            start, stop = slices[k]
            state = self.states[k]
            sl = slice(start, stop)
            if local_step:
                gaussian_grads = {
                    "mean": grads.means[sl],
                    "scale": grads.scales[sl],
                    "quat": grads.quats[sl],
                    "opacity": grads.opacities[sl],
                    "color": grads.colors[sl],
                }
            else:
                transform_grads, d_means, d_scales, d_quats = transform_backward(
                    state.cloud(), state.transform(),
                    grads.means[sl], grads.scales[sl], grads.quats[sl],
                )
                gaussian_grads = {
                    "mean": d_means,
                    "scale": d_scales,
                    "quat": d_quats,
                    "opacity": grads.opacities[sl],
                    "color": grads.colors[sl],
                }
                state.apply_transform_grads(transform_grads)
            if config.semantic_trainable:
                gaussian_grads["semantic"] = grads.semantics[sl]
            state.apply_gaussian_grads(gaussian_grads)
            state.accumulate_view_stats(
                grads.mean2d[sl], grads.visibility[sl], grads.max_radii_px[sl]
            )

        events = self._density_control()

        foreground = max(int(mask_set.masks.sum()), 1)
        shares = {
            f"{k}:{l}": float(mask_set.masks[i].sum() / foreground)
            for i, (k, l, _) in enumerate(entries)
        }
        self.metrics.append(
            {
                "step": self.step_index,
                "mode": "local" if local_step else ("scene" if mode[0] == "scene" else "pair"),
                "objects": [self.states[k].object_id for k in rendered],
                "t": t,
                "loss_proxy": sds.residual_norm,
                "oracle_calls": sds.oracle_calls,
                "n_gaussians": int(sum(len(s) for s in self.states)),
                "region_pixel_share": shares,
                "partition_ok": partition_ok,
                "events": events,
            }
        )
        self.step_index += 1

    def _density_control(self):
        config = self.config
        events = []
        step = self.step_index + 1
        needs_extent = (
            step % config.densify.interval == 0
            or step % config.densify.compactness_interval == 0
            or step % config.prune.interval == 0
        )
        if not needs_extent:
            return events
        scene_extent = self.current_scene().extent()
        image_diag = float(np.sqrt(2.0) * config.render_size)
        if step % config.densify.interval == 0:
            for state in self.states:
                event = densify_object(state, config.densify, scene_extent, self.rng)
                if event:
                    events.append(event)
        if step % config.densify.compactness_interval == 0:
            for state in self.states:
                event = compactness_object(state, self.rng, config.densify.max_gaussians)
                if event:
                    events.append(event)
        if step % config.prune.interval == 0:
            for state in self.states:
                event = prune_object(state, config.prune, scene_extent, image_diag)
                if event:
                    events.append(event)
        return events

    def run(self, iterations=None, metrics_fh=None):
        iterations = self.config.iterations if iterations is None else iterations
        written = 0
        for _ in range(iterations):
            self.step()
            if metrics_fh is not None:
                for line in self.metrics[written:]:
                    metrics_fh.write(json.dumps(line, sort_keys=True) + "\n")
                written = len(self.metrics)
        return self.current_scene()


def train(scene, codec, provider, oracle, config, metrics_fh=None):
    """Run the full configured loop; returns (optimized scene, metrics)."""
    trainer = Trainer(scene, codec, provider, oracle, config)
    result = trainer.run(metrics_fh=metrics_fh)
    return result, trainer.metrics
