"""End-to-end: the optimization engine drives the mock service over HTTP.

Spins up a real uvicorn server on an ephemeral port, points the engine's
remote oracle and remote embedding provider at it, and runs ten
score-distillation steps. The engine side is imported only here, in tests:
the service itself never depends on it.
"""
import socket
import threading
import time

import numpy as np
import pytest
import uvicorn

from guidance_service.app import create_app
from guidance_service.config import ServiceConfig

semsplat = pytest.importorskip("semsplat")

RENDER_SIZE = 32
D_H = 48


@pytest.fixture(scope="module")
def server_url():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    config = ServiceConfig(mode="mock", latent_hw=RENDER_SIZE, d_h=D_H, seed=0)
    server = uvicorn.Server(
        uvicorn.Config(create_app(config), host="127.0.0.1", port=port,
                       log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def demo_plan():
    from semsplat.layout.planfile import LayoutPlan

    return LayoutPlan.from_dict(
        {
            "objects": [
                {"id": "box", "prompt": "a box", "size_estimate": [1, 1, 1]},
                {"id": "orb", "prompt": "an orb", "size_estimate": [0.6, 0.6, 0.6]},
            ],
            "program": [
                "place(box, 1, vec(0, 0, 0), vec(-0.6, 0, 0.5))",
                "place(orb, 1, vec(0, 0, 0), vec(0.6, 0, 0.3))",
            ],
            "region_trees": {
                "box": {
                    "axis": "depth",
                    "fractions": [0.5, 0.5],
                    "children": [{"subprompt": "stone base"},
                                 {"subprompt": "moss top"}],
                },
                "orb": {"subprompt": "a glass orb"},
            },
        }
    )


class TestEngineAgainstMockService:
    def test_ten_sds_steps_zero_transport_errors(self, server_url):
        from semsplat.guidance.oracles import RemoteOracle
        from semsplat.optim import TrainConfig, Trainer
        from semsplat.pipeline import build_codec, build_scene
        from semsplat.semantic.providers import RemoteEmbeddingProvider

        provider = RemoteEmbeddingProvider(server_url)
        assert provider.d_h == D_H
        oracle = RemoteOracle(server_url, cfg_scale=3.0, retries=0)
        assert oracle.resolution == (RENDER_SIZE, RENDER_SIZE)

        config = TrainConfig.from_dict(
            {
                "iterations": 10,
                "seed": 3,
                "render_size": RENDER_SIZE,
                "codec": {"d_h": D_H, "d_f": 6, "hidden": 64, "epochs": 120},
                "init": {"gaussians_per_object": 40, "opacity": 0.9},
                "prune": {"interval": 1000},
                "densify": {"interval": 1000},
            }
        )
        plan = demo_plan()
        codec = build_codec(plan, provider, config.codec, scene_prompt="test scene",
                            seed=0)
        scene = build_scene(plan, "test scene", provider, codec, config.init, seed=3)
        trainer = Trainer(scene, codec, provider, oracle, config)
        trainer.run(10)

        assert trainer.step_index == 10
        assert len(trainer.metrics) == 10
        assert all(np.isfinite(m["loss_proxy"]) for m in trainer.metrics)
        # every step called the oracle at least once and none raised
        assert all(m["oracle_calls"] >= 1 for m in trainer.metrics)
        assert oracle.calls == sum(m["oracle_calls"] for m in trainer.metrics)

    def test_cross_component_embedding_agreement(self, server_url):
        from semsplat.semantic.providers import (
            PseudoEmbeddingProvider,
            RemoteEmbeddingProvider,
        )

        remote = RemoteEmbeddingProvider(server_url)
        local = PseudoEmbeddingProvider(d_h=D_H, seed=0)
        for text in ("stone base", "moss top", "a glass orb"):
            assert np.allclose(remote.encode(text), local.encode(text), atol=1e-12)
