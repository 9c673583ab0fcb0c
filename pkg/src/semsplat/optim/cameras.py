"""Camera sampling and object-specific view descriptors.

World convention: z points up, azimuth is measured in the xy-plane from the
positive x axis, elevation from the xy-plane toward +z.
"""
from __future__ import annotations

import numpy as np

from semsplat.core.types import Camera
from semsplat.errors import InvalidParameterError

OVERHEAD = "overhead view"
FRONT = "front view"
BACK = "back view"
SIDE = "side view"


def select_view_descriptor(camera_position, object_center,
                           overhead_elevation_deg=60.0,
                           front_back_azimuth_deg=45.0):
    """Sector label for the camera direction relative to one object.

    Overhead wins above the elevation threshold; otherwise the azimuth picks
    front (within +/-45 deg of +x), back (within +/-45 deg of -x) or side.
    """
    direction = np.asarray(camera_position, dtype=np.float64) - np.asarray(
        object_center, dtype=np.float64
    )
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        raise InvalidParameterError("camera sits exactly on the object center")
    n_hat = direction / norm
    elevation = np.degrees(np.arcsin(np.clip(n_hat[2], -1.0, 1.0)))
    if elevation > overhead_elevation_deg:
        return OVERHEAD
    azimuth = np.degrees(np.arctan2(n_hat[1], n_hat[0]))
    if abs(azimuth) <= front_back_azimuth_deg:
        return FRONT
    if abs(azimuth) >= 180.0 - front_back_azimuth_deg:
        return BACK
    return SIDE


def _place(look_at, reference, rng, config, size):
    elevation = np.radians(rng.uniform(*config.elevation_deg))
    azimuth = np.radians(rng.uniform(*config.azimuth_deg))
    distance = max(config.distance_factor * reference, 10.0 * config.near)
    offset = distance * np.array(
        [
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ]
    )
    position = np.asarray(look_at, dtype=np.float64) + offset
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.sin(elevation)) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    return Camera(
        position=position,
        look_at=np.asarray(look_at, dtype=np.float64),
        up=up,
        fov_y=np.radians(config.fov_y_deg),
        width=size,
        height=size,
        near=config.near,
        far=config.far,
    )


def sample_camera(mode, scene, config, rng, size):
    """mode: ("scene",) | ("object", k) local frame | ("pair", i, j) global.

    Look-at targets the scene center, the object's local box center, or the
    pair midpoint; the viewing distance scales with the rendered content
    (for pairs: the larger object extent plus half the center separation).
    """
    kind = mode[0]
    if kind == "scene":
        return _place(scene.center(), scene.extent(), rng, config, size)
    if kind == "object":
        obj = scene.objects[mode[1]]
        reference = float(np.max(obj.box.extent))
        return _place(obj.box.center, reference, rng, config, size)
    if kind == "pair":
        a, b = scene.objects[mode[1]], scene.objects[mode[2]]
        ca, cb = a.center_global(), b.center_global()
        separation = float(np.linalg.norm(ca - cb))
        reference = max(a.extent_global(), b.extent_global()) + 0.5 * separation
        return _place(0.5 * (ca + cb), reference, rng, config, size)
    raise InvalidParameterError(f"unknown camera mode {mode!r}")
