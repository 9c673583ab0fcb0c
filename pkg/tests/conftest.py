import numpy as np
import pytest

from semsplat.core.types import Camera, GaussianCloud


def random_scene_cloud(rng, n, d_f=4, spread=1.0, opacity_range=(0.1, 0.9),
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


def front_camera(size=32, distance=4.0, fov=0.8):
    return Camera(
        position=np.array([0.0, 0.0, -distance]),
        look_at=np.zeros(3),
        up=np.array([0.0, 1.0, 0.0]),
        fov_y=fov,
        width=size,
        height=size,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
