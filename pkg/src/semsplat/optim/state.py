"""Mutable per-object training state.

Opacities live pre-sigmoid here so Adam steps stay unconstrained; scales are
clamped to a floor after every update instead of being reparameterized.
"""
from __future__ import annotations

import numpy as np

from semsplat.core import rotations
from semsplat.core.types import GaussianCloud, ObjectTransform
from semsplat.optim.adam import GroupAdam

MIN_SCALE = 1e-6
MIN_TRANSFORM_SCALE = 1e-4
GAUSSIAN_GROUPS = ("mean", "scale", "quat", "opacity", "color", "semantic")
TRANSFORM_GROUPS = ("t_scale", "t_quat", "t_translation")


def logit(p):
    p = np.clip(p, 1e-6, 1.0 - 1e-6)
    return np.log(p / (1.0 - p))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class ObjectState:
    def __init__(self, obj, learning_rates):
        cloud = obj.gaussians
        self.object_id = obj.id
        self.prompt = obj.prompt
        self.regions = list(obj.regions)
        self.mean = cloud.means.copy()
        self.scale = cloud.scales.copy()
        self.quat = cloud.quats.copy()
        self.opacity = logit(cloud.opacities.copy())
        self.color = cloud.colors.copy()
        self.semantic = cloud.semantics.copy()
        self.region_ids = cloud.region_ids.copy()
        self.t_scale = np.array([obj.transform.scale])
        self.t_quat = obj.transform.rotation.copy()
        self.t_translation = obj.transform.translation.copy()
        self.adam = GroupAdam(
            {
                "mean": learning_rates.mean,
                "scale": learning_rates.scale,
                "quat": learning_rates.rotation,
                "opacity": learning_rates.opacity,
                "color": learning_rates.color,
                "semantic": learning_rates.semantic,
                "t_scale": learning_rates.transform_scale,
                "t_quat": learning_rates.transform_rotation,
                "t_translation": learning_rates.transform_translation,
            }
        )
        n = len(cloud)
        self.grad_accum = np.zeros(n)
        self.grad_count = np.zeros(n, dtype=np.int64)
        self.max_view_radius = np.zeros(n)

    def __len__(self):
        return self.mean.shape[0]

    def cloud(self) -> GaussianCloud:
        return GaussianCloud(
            means=self.mean,
            scales=self.scale,
            quats=self.quat,
            opacities=sigmoid(self.opacity),
            colors=self.color,
            semantics=self.semantic,
            region_ids=self.region_ids,
        )

    def transform(self) -> ObjectTransform:
        return ObjectTransform(
            scale=float(self.t_scale[0]),
            rotation=rotations.normalize(self.t_quat),
            translation=self.t_translation.copy(),
        )

    def apply_gaussian_grads(self, grads):
        """grads: dict group -> gradient array (opacity grad in [0,1] space)."""
        opacity_sig = sigmoid(self.opacity)
        chain = {
            "mean": grads["mean"],
            "scale": grads["scale"],
            "quat": grads["quat"],
            "opacity": grads["opacity"] * opacity_sig * (1.0 - opacity_sig),
            "color": grads["color"],
            "semantic": grads.get("semantic"),
        }
        for name in GAUSSIAN_GROUPS:
            grad = chain.get(name)
            if grad is None:
                continue
            array = getattr(self, name)
            self.adam.step(name, array, grad)
        self.scale[:] = np.maximum(self.scale, MIN_SCALE)
        self.quat[:] = rotations.normalize(self.quat)
        self.color[:] = np.clip(self.color, 0.0, 1.0)

    def apply_transform_grads(self, tg):
        self.adam.step("t_scale", self.t_scale, np.array([tg.scale]))
        self.adam.step("t_quat", self.t_quat, tg.rotation)
        self.adam.step("t_translation", self.t_translation, tg.translation)
        self.t_scale[:] = np.maximum(self.t_scale, MIN_TRANSFORM_SCALE)
        self.t_quat[:] = rotations.normalize(self.t_quat)

    def accumulate_view_stats(self, mean2d_grads, visibility, radii_px):
        norms = np.linalg.norm(mean2d_grads, axis=1)
        self.grad_accum += np.where(visibility, norms, 0.0)
        self.grad_count += visibility.astype(np.int64)
        self.max_view_radius = np.maximum(self.max_view_radius, radii_px)

    def reset_grad_stats(self):
        self.grad_accum[:] = 0.0
        self.grad_count[:] = 0

    def select_rows(self, index):
        for name in ("mean", "scale", "quat", "opacity", "color", "semantic",
                     "region_ids", "grad_accum", "grad_count", "max_view_radius"):
            setattr(self, name, getattr(self, name)[index])
        for group in GAUSSIAN_GROUPS:
            self.adam.select_rows(group, index)

    def append_rows(self, rows):
        """rows: dict with mean/scale/quat/opacity(logit)/color/semantic/region_ids."""
        count = rows["mean"].shape[0]
        if count == 0:
            return
        for name in ("mean", "scale", "quat", "opacity", "color", "semantic",
                     "region_ids"):
            setattr(self, name, np.concatenate([getattr(self, name), rows[name]]))
        self.grad_accum = np.concatenate([self.grad_accum, np.zeros(count)])
        self.grad_count = np.concatenate(
            [self.grad_count, np.zeros(count, dtype=np.int64)]
        )
        self.max_view_radius = np.concatenate([self.max_view_radius, np.zeros(count)])
        for group in GAUSSIAN_GROUPS:
            self.adam.append_rows(group, count)
