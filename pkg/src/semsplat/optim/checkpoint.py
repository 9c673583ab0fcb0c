"""Checkpoints: scene file + codec weights + config + rng state + step."""
from __future__ import annotations

import json
from pathlib import Path

from semsplat.core import sceneio
from semsplat.optim.config import TrainConfig, save_config
from semsplat.semantic.codec import EmbeddingCodec


def save_checkpoint(directory, trainer, metrics_name="metrics.jsonl"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scene = trainer.current_scene()
    sceneio.save_scene(scene, directory / "scene.json")
    trainer.codec.save(directory / "codec.aec")
    save_config(trainer.config, directory / "config.json")
    state = {
        "step_index": trainer.step_index,
        "rng_state": trainer.rng.bit_generator.state,
        "metrics_file": metrics_name,
    }
    with open(directory / "trainer_state.json", "w") as fh:
        json.dump(state, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory


def load_checkpoint(directory, provider, oracle, config=None):
    """Rebuild a Trainer positioned exactly where it was saved."""
    from semsplat.optim.train import Trainer

    directory = Path(directory)
    scene = sceneio.load_scene(directory / "scene.json")
    codec = EmbeddingCodec.load(directory / "codec.aec")
    if config is None:
        with open(directory / "config.json") as fh:
            config = TrainConfig.from_dict(json.load(fh))
    with open(directory / "trainer_state.json") as fh:
        state = json.load(fh)
    trainer = Trainer(scene, codec, provider, oracle, config)
    trainer.step_index = state["step_index"]
    trainer.rng.bit_generator.state = state["rng_state"]
    return trainer
