"""Launch the service: `guidance-service --mode mock --port 8731`."""
from __future__ import annotations

import argparse

import uvicorn

from guidance_service.app import create_app
from guidance_service.config import ServiceConfig


def main(argv=None):
    parser = argparse.ArgumentParser(prog="guidance-service")
    parser.add_argument("--mode", choices=["mock", "real"], default="mock")
    parser.add_argument("--model-id", default=ServiceConfig.model_id)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--cfg-scale", type=float, default=7.5)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8731)
    parser.add_argument("--latent-hw", type=int, default=64,
                        help="mock-mode latent grid size")
    parser.add_argument("--d-h", type=int, default=512,
                        help="mock-mode embedding width")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    config = ServiceConfig(
        mode=args.mode, model_id=args.model_id, device=args.device,
        cfg_scale=args.cfg_scale, host=args.host, port=args.port,
        latent_hw=args.latent_hw, d_h=args.d_h, seed=args.seed,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="warning")


if __name__ == "__main__":
    main()
