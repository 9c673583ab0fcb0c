"""FastAPI application exposing the guidance wire protocol.

POST /v1/predict_noise  {prompt, view_descriptor, t, x_t, cfg_scale} -> {epsilon}
POST /v1/encode_text    {text} -> {embedding}
GET  /v1/health         -> {ok, model_id, latent_hw, d_h}
"""
from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from guidance_service.config import ServiceConfig
from guidance_service.mock import MockBackend
from guidance_service.wire import WireError, decode_tensor, encode_tensor


class TensorPayload(BaseModel):
    data: str
    shape: list


class PredictRequest(BaseModel):
    prompt: str
    view_descriptor: str = ""
    t: int = Field(ge=1)
    x_t: TensorPayload
    cfg_scale: float | None = None


class EncodeRequest(BaseModel):
    text: str


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="guidance-service")
    state = {"backend": None, "error": None}
    # real mode serializes UNet forwards; the mock backend is reentrant
    inference_lock = threading.Lock()

    if config.mode == "mock":
        state["backend"] = MockBackend(config)
    else:
        from guidance_service.real import ModelLoadError, RealBackend

        try:
            state["backend"] = RealBackend(config)
        except ModelLoadError as err:
            state["error"] = str(err)

    def backend_or_503():
        backend = state["backend"]
        if backend is None:
            raise HTTPException(status_code=503, detail=state["error"] or "not loaded")
        return backend

    @app.get("/v1/health")
    def health():
        backend = state["backend"]
        if backend is None:
            return {"ok": False, "error": state["error"], "model_id": config.model_id,
                    "latent_hw": config.latent_hw, "d_h": config.d_h}
        return {
            "ok": True,
            "model_id": backend.model_id,
            "latent_hw": backend.latent_hw,
            "d_h": backend.d_h,
        }

    @app.post("/v1/predict_noise")
    def predict_noise(request: PredictRequest):
        backend = backend_or_503()
        try:
            x_t = decode_tensor(request.x_t.model_dump())
        except WireError as err:
            raise HTTPException(status_code=400, detail=str(err))
        cfg = config.cfg_scale if request.cfg_scale is None else request.cfg_scale
        try:
            with inference_lock:
                epsilon = backend.predict_noise(
                    x_t, request.prompt, request.view_descriptor, request.t, cfg
                )
        except ValueError as err:
            raise HTTPException(status_code=400, detail=str(err))
        return {"epsilon": encode_tensor(epsilon)}

    @app.post("/v1/encode_text")
    def encode_text(request: EncodeRequest):
        backend = backend_or_503()
        if not request.text.strip():
            raise HTTPException(status_code=400, detail="empty text")
        embedding = backend.encode_text(request.text)
        return {"embedding": [float(v) for v in embedding]}

    return app
