"""Guidance oracles: the noise-prediction interface behind the SDS loop.

Every oracle answers predict_noise(x_t, prompt, view_descriptor, t) with a
tensor shaped like x_t. Three implementations:

  * AnalyticOracle  - holds a target image per prompt and inverts the
    forward noising map exactly; used for verification and recovery runs.
  * RemoteOracle    - HTTP client for the guidance service.
  * RecordedOracle  - replays stored responses keyed by a request digest.
"""
from __future__ import annotations

import hashlib
import json
import pickle

import numpy as np

from semsplat.errors import InvalidParameterError, NotFoundError, OracleError
from semsplat.guidance.schedule import NoiseSchedule
from semsplat.guidance.wire import decode_tensor, encode_tensor


class AnalyticOracle:
    """Predicts the exact noise for a known target image per prompt:

        epsilon_hat = (x_t - sqrt(alpha_bar_t) * target) / sqrt(1 - alpha_bar_t)

    With x_t = add_noise(x, t, eps) this gives
    epsilon_hat - eps = sqrt(alpha_bar/(1-alpha_bar)) * (x - target), i.e. a
    noise-free pull of the rendered image toward the target.
    """

    kind = "analytic"

    def __init__(self, targets, schedule: NoiseSchedule, resolution=None,
                 channels=3):
        """targets: dict prompt -> (H, W, C) image or length-C color."""
        self.schedule = schedule
        self.resolution = resolution  # (h, w) or None = follow x_t
        self.channels = channels
        self.targets = {}
        for prompt, value in targets.items():
            self.targets[prompt] = np.asarray(value, dtype=np.float64)
        self.calls = 0

    def _target_image(self, prompt, shape):
        if prompt not in self.targets:
            raise NotFoundError(f"analytic oracle has no target for {prompt!r}")
        target = self.targets[prompt]
        if target.ndim == 1:
            if target.shape[0] != shape[-1]:
                raise InvalidParameterError(
                    f"target color for {prompt!r} has {target.shape[0]} channels, "
                    f"x_t has {shape[-1]}"
                )
            return np.broadcast_to(target, shape)
        if target.shape != shape:
            raise InvalidParameterError(
                f"target for {prompt!r} has shape {target.shape}, x_t {shape}"
            )
        return target

    def predict_noise(self, x_t, prompt, view_descriptor, t):
        x_t = np.asarray(x_t, dtype=np.float64)
        target = self._target_image(prompt, x_t.shape)
        ab = self.schedule.alpha_bar(t)
        self.calls += 1
        return (x_t - np.sqrt(ab) * target) / np.sqrt(1.0 - ab)


def request_digest(x_t, prompt, view_descriptor, t):
    payload = encode_tensor(x_t)
    key = json.dumps(
        {"prompt": prompt, "view": view_descriptor, "t": int(t),
         "shape": payload["shape"], "data": payload["data"]},
        sort_keys=True,
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


class RecordedOracle:
    """Replay fixture. Optionally wraps a source oracle to record new entries."""

    kind = "recorded"

    def __init__(self, fixtures=None, source=None):
        self.fixtures = dict(fixtures or {})
        self.source = source
        self.calls = 0

    def predict_noise(self, x_t, prompt, view_descriptor, t):
        key = request_digest(x_t, prompt, view_descriptor, t)
        self.calls += 1
        if key in self.fixtures:
            return self.fixtures[key].copy()
        if self.source is None:
            raise NotFoundError(f"no recorded response for request {key[:12]}...")
        response = self.source.predict_noise(x_t, prompt, view_descriptor, t)
        self.fixtures[key] = np.asarray(response, dtype=np.float64)
        return response

    def save(self, path):
        with open(path, "wb") as fh:
            pickle.dump(self.fixtures, fh)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls(fixtures=pickle.load(fh))


class RemoteOracle:
    """Client for the guidance service's /v1/predict_noise endpoint."""

    kind = "remote"

    def __init__(self, base_url, cfg_scale=7.5, timeout=120.0, retries=2,
                 session=None):
        import requests

        self.base_url = base_url.rstrip("/")
        self.cfg_scale = cfg_scale
        self.timeout = timeout
        self.retries = retries
        self._session = session or requests.Session()
        self.calls = 0
        try:
            health = self._session.get(
                f"{self.base_url}/v1/health", timeout=self.timeout
            )
            health.raise_for_status()
            info = health.json()
        except Exception as err:  # noqa: BLE001 - transport errors vary by stack
            raise OracleError(f"guidance service handshake failed: {err}")
        if not info.get("ok"):
            raise OracleError(f"guidance service not ready: {info}")
        self.model_id = info.get("model_id")
        self.latent_hw = int(info["latent_hw"])
        self.d_h = int(info.get("d_h", 0))

    @property
    def resolution(self):
        return (self.latent_hw, self.latent_hw)

    def predict_noise(self, x_t, prompt, view_descriptor, t):
        body = {
            "prompt": prompt,
            "view_descriptor": view_descriptor or "",
            "t": int(t),
            "x_t": encode_tensor(x_t),
            "cfg_scale": self.cfg_scale,
        }
        last = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/v1/predict_noise", json=body,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                self.calls += 1
                epsilon = decode_tensor(resp.json()["epsilon"])
                if epsilon.shape != np.asarray(x_t).shape:
                    raise OracleError(
                        f"service returned shape {epsilon.shape}, "
                        f"expected {np.asarray(x_t).shape}"
                    )
                return epsilon
            except OracleError:
                raise
            except Exception as err:  # noqa: BLE001
                last = err
        raise OracleError(
            f"predict_noise failed after {self.retries + 1} attempts: {last}",
            retries=self.retries,
        )
