from semsplat.core.types import (
    BoundingBox,
    Camera,
    Gaussian3D,
    GaussianCloud,
    ObjectModel,
    ObjectTransform,
    Region,
    Scene,
)
from semsplat.core.compose import (
    ComposedScene,
    compose_scene,
    covariance_from_factors,
    evaluate_density,
    transform_backward,
    transform_cloud,
    transform_gaussian,
)

__all__ = [
    "BoundingBox",
    "Camera",
    "ComposedScene",
    "Gaussian3D",
    "GaussianCloud",
    "ObjectModel",
    "ObjectTransform",
    "Region",
    "Scene",
    "compose_scene",
    "covariance_from_factors",
    "evaluate_density",
    "transform_backward",
    "transform_cloud",
    "transform_gaussian",
]
