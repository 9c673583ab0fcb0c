"""Scene representation: Gaussians, objects, transforms, cameras, boxes.

Gaussian collections are stored struct-of-arrays (`GaussianCloud`) so the
rasterizer and optimizer can work on contiguous numpy buffers; `Gaussian3D`
is the single-element view used for construction and tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semsplat.errors import InvalidParameterError, NotFoundError
from semsplat.core import rotations

QUAT_NORM_TOL = 1e-6
MIN_SCALE = 1e-6


@dataclass
class BoundingBox:
    """Axis-aligned box given by min/max corners."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        self.min_corner = np.asarray(self.min_corner, dtype=np.float64)
        self.max_corner = np.asarray(self.max_corner, dtype=np.float64)
        if self.min_corner.shape != (3,) or self.max_corner.shape != (3,):
            raise InvalidParameterError("box corners must be 3-vectors")
        if np.any(self.min_corner > self.max_corner):
            raise InvalidParameterError("box min corner exceeds max corner")

    @property
    def extent(self):
        return self.max_corner - self.min_corner

    @property
    def center(self):
        return 0.5 * (self.min_corner + self.max_corner)

    @property
    def volume(self):
        return float(np.prod(self.extent))

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all(
            (points >= self.min_corner) & (points <= self.max_corner), axis=-1
        )

    def union(self, other):
        return BoundingBox(
            np.minimum(self.min_corner, other.min_corner),
            np.maximum(self.max_corner, other.max_corner),
        )

    def corners(self):
        lo, hi = self.min_corner, self.max_corner
        pts = [(x, y, z) for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        return np.array(pts, dtype=np.float64)

    def to_dict(self):
        return {"min": self.min_corner.tolist(), "max": self.max_corner.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["min"], dtype=np.float64), np.array(d["max"], dtype=np.float64))


@dataclass
class Gaussian3D:
    """A single anisotropic Gaussian with color and a compressed semantic code."""

    mean: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray  # unit quaternion, wxyz
    opacity: float
    color: np.ndarray
    semantic: np.ndarray
    region_id: tuple = (0, 0)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.color = np.asarray(self.color, dtype=np.float64)
        self.semantic = np.asarray(self.semantic, dtype=np.float64)
        if np.any(self.scale <= 0):
            raise InvalidParameterError("gaussian scale must be positive")
        if abs(np.linalg.norm(self.rotation) - 1.0) > QUAT_NORM_TOL:
            raise InvalidParameterError("gaussian rotation must be a unit quaternion")
        if not 0.0 <= self.opacity <= 1.0:
            raise InvalidParameterError("opacity must lie in [0, 1]")


class GaussianCloud:
    """Struct-of-arrays container for N Gaussians sharing one semantic width."""

    def __init__(self, means, scales, quats, opacities, colors, semantics, region_ids):
        self.means = np.asarray(means, dtype=np.float64).reshape(-1, 3)
        n = self.means.shape[0]
        self.scales = np.asarray(scales, dtype=np.float64).reshape(n, 3)
        self.quats = np.asarray(quats, dtype=np.float64).reshape(n, 4)
        self.opacities = np.asarray(opacities, dtype=np.float64).reshape(n)
        self.colors = np.asarray(colors, dtype=np.float64).reshape(n, 3)
        semantics = np.asarray(semantics, dtype=np.float64)
        self.semantics = semantics if semantics.ndim == 2 else semantics.reshape(n, -1)
        self.region_ids = np.asarray(region_ids, dtype=np.int64).reshape(n, 2)

    def __len__(self):
        return self.means.shape[0]

    @property
    def feature_dim(self):
        return self.semantics.shape[1]

    @classmethod
    def empty(cls, feature_dim):
        z = np.zeros((0,))
        return cls(
            np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)), z,
            np.zeros((0, 3)), np.zeros((0, feature_dim)), np.zeros((0, 2), dtype=np.int64),
        )

    @classmethod
    def from_gaussians(cls, gaussians, feature_dim=None):
        if not gaussians:
            return cls.empty(0 if feature_dim is None else feature_dim)
        return cls(
            [g.mean for g in gaussians],
            [g.scale for g in gaussians],
            [g.rotation for g in gaussians],
            [g.opacity for g in gaussians],
            [g.color for g in gaussians],
            [g.semantic for g in gaussians],
            [g.region_id for g in gaussians],
        )

    def gaussian(self, i):
        return Gaussian3D(
            mean=self.means[i].copy(),
            scale=self.scales[i].copy(),
            rotation=self.quats[i].copy(),
            opacity=float(self.opacities[i]),
            color=self.colors[i].copy(),
            semantic=self.semantics[i].copy(),
            region_id=tuple(int(v) for v in self.region_ids[i]),
        )

    def copy(self):
        return GaussianCloud(
            self.means.copy(), self.scales.copy(), self.quats.copy(),
            self.opacities.copy(), self.colors.copy(), self.semantics.copy(),
            self.region_ids.copy(),
        )

    def select(self, mask_or_indices):
        idx = np.asarray(mask_or_indices)
        return GaussianCloud(
            self.means[idx], self.scales[idx], self.quats[idx],
            self.opacities[idx], self.colors[idx], self.semantics[idx],
            self.region_ids[idx],
        )

    @staticmethod
    def concatenate(clouds):
        clouds = list(clouds)
        if not clouds:
            return GaussianCloud.empty(0)
        return GaussianCloud(
            np.concatenate([c.means for c in clouds]),
            np.concatenate([c.scales for c in clouds]),
            np.concatenate([c.quats for c in clouds]),
            np.concatenate([c.opacities for c in clouds]),
            np.concatenate([c.colors for c in clouds]),
            np.concatenate([c.semantics for c in clouds]),
            np.concatenate([c.region_ids for c in clouds]),
        )

    def validate(self):
        if np.any(self.scales <= 0):
            raise InvalidParameterError("all scales must be positive")
        norms = np.linalg.norm(self.quats, axis=1)
        if np.any(np.abs(norms - 1.0) > QUAT_NORM_TOL):
            raise InvalidParameterError("all rotations must be unit quaternions")
        if np.any(self.opacities < 0) or np.any(self.opacities > 1):
            raise InvalidParameterError("opacities must lie in [0, 1]")


@dataclass
class ObjectTransform:
    """Similarity transform placing an object's local frame in the scene."""

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=rotations.identity_quat)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.scale = float(self.scale)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.scale <= 0:
            raise InvalidParameterError("transform scale must be positive")
        if abs(np.linalg.norm(self.rotation) - 1.0) > QUAT_NORM_TOL:
            raise InvalidParameterError("transform rotation must be a unit quaternion")
        det = np.linalg.det(rotations.quat_to_matrix(self.rotation))
        if abs(det - 1.0) > 1e-6:
            raise InvalidParameterError("transform rotation must be proper")

    @property
    def matrix(self):
        return rotations.quat_to_matrix(self.rotation)

    def apply_points(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return self.scale * pts @ self.matrix.T + self.translation

    def inverse(self):
        r_inv = rotations.quat_conjugate(rotations.normalize(self.rotation))
        m_inv = rotations.quat_to_matrix(r_inv)
        return ObjectTransform(
            scale=1.0 / self.scale,
            rotation=r_inv,
            translation=-(1.0 / self.scale) * m_inv @ self.translation,
        )

    @classmethod
    def identity(cls):
        return cls()

    def to_dict(self):
        return {
            "scale": self.scale,
            "rotation_quat_wxyz": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            scale=d["scale"],
            rotation=np.array(d["rotation_quat_wxyz"], dtype=np.float64),
            translation=np.array(d["translation"], dtype=np.float64),
        )


@dataclass
class Region:
    subprompt: str
    box: BoundingBox


@dataclass
class ObjectModel:
    """A local-coordinate Gaussian cloud plus its placement and region split."""

    id: str
    prompt: str
    regions: list
    gaussians: GaussianCloud
    transform: ObjectTransform = field(default_factory=ObjectTransform.identity)

    def validate(self, object_index=None):
        self.gaussians.validate()
        n_regions = len(self.regions)
        if n_regions == 0:
            raise InvalidParameterError(f"object {self.id!r} has no regions")
        ls = self.gaussians.region_ids[:, 1]
        if len(self.gaussians) and (ls.min() < 0 or ls.max() >= n_regions):
            raise InvalidParameterError(
                f"object {self.id!r}: gaussian region index out of range"
            )
        if object_index is not None and len(self.gaussians):
            ks = self.gaussians.region_ids[:, 0]
            if np.any(ks != object_index):
                raise InvalidParameterError(
                    f"object {self.id!r}: gaussian object index mismatch"
                )

    @property
    def box(self):
        box = self.regions[0].box
        for region in self.regions[1:]:
            box = box.union(region.box)
        return box

    def center_global(self):
        return self.transform.apply_points(self.box.center.reshape(1, 3))[0]

    def extent_global(self):
        return self.transform.scale * float(np.max(self.box.extent))


@dataclass
class Scene:
    objects: list
    prompt: str

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise InvalidParameterError("object ids must be unique")
        if not self.objects:
            raise InvalidParameterError("a scene needs at least one object")

    def object_index(self, object_id):
        for k, obj in enumerate(self.objects):
            if obj.id == object_id:
                return k
        raise NotFoundError(f"unknown object id {object_id!r}")

    def validate(self):
        for k, obj in enumerate(self.objects):
            obj.validate(object_index=k)

    def center(self):
        return np.mean([o.center_global() for o in self.objects], axis=0)

    def extent(self):
        """Half-diagonal of the union of transformed object boxes."""
        corners = np.concatenate(
            [o.transform.apply_points(o.box.corners()) for o in self.objects]
        )
        lo, hi = corners.min(axis=0), corners.max(axis=0)
        return 0.5 * float(np.linalg.norm(hi - lo))

    def subprompts(self, subset=None):
        """Ordered (k, l, subprompt) triples for the selected objects."""
        out = []
        for k, obj in enumerate(self.objects):
            if subset is not None and obj.id not in subset:
                continue
            for l, region in enumerate(obj.regions):
                out.append((k, l, region.subprompt))
        return out


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_y: float  # vertical field of view, radians
    width: int
    height: int
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.look_at = np.asarray(self.look_at, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        if self.width <= 0 or self.height <= 0:
            raise InvalidParameterError("image size must be positive")
        if not 0 < self.near < self.far:
            raise InvalidParameterError("need 0 < near < far")
        forward = self.look_at - self.position
        fn = np.linalg.norm(forward)
        if fn < 1e-12:
            raise InvalidParameterError("camera position and look-at coincide")
        cross = np.cross(forward / fn, self.up / np.linalg.norm(self.up))
        if np.linalg.norm(cross) < 1e-9:
            raise InvalidParameterError("camera up vector parallel to view direction")

    @property
    def focal(self):
        """Focal length in pixels (square pixels, set by the vertical FOV)."""
        return self.height / (2.0 * np.tan(0.5 * self.fov_y))

    def world_to_camera(self):
        """Rotation R and camera position p with X_cam = R @ (X_world - p).

        Camera axes: x right, y down, z forward (into the screen).
        """
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        up = self.up / np.linalg.norm(self.up)
        right = np.cross(fwd, up)
        right = right / np.linalg.norm(right)
        down = np.cross(fwd, right)
        rot = np.stack([right, down, fwd])
        return rot, self.position.copy()
