from semsplat.optim.config import TrainConfig, load_config, save_config
from semsplat.optim.cameras import sample_camera, select_view_descriptor
from semsplat.optim.density import compactness_object, densify_object, prune_object
from semsplat.optim.state import ObjectState
from semsplat.optim.train import Trainer, train
from semsplat.optim.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ObjectState",
    "TrainConfig",
    "Trainer",
    "compactness_object",
    "densify_object",
    "load_checkpoint",
    "load_config",
    "prune_object",
    "sample_camera",
    "save_checkpoint",
    "save_config",
    "select_view_descriptor",
    "train",
]
