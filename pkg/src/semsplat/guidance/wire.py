"""Tensor encoding for the guidance wire protocol (shared with the service).

Tensors travel as base64 little-endian f32 plus an explicit shape list;
the round trip is lossless for f32 payloads.
"""
from __future__ import annotations

import base64

import numpy as np

from semsplat.errors import InvalidParameterError


def encode_tensor(array):
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    return {
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        "shape": list(arr.shape),
    }


def decode_tensor(payload):
    try:
        raw = base64.b64decode(payload["data"])
        shape = tuple(int(s) for s in payload["shape"])
    except (KeyError, TypeError, ValueError) as err:
        raise InvalidParameterError(f"malformed tensor payload: {err}")
    arr = np.frombuffer(raw, dtype="<f4")
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise InvalidParameterError("tensor payload size does not match shape")
    return arr.reshape(shape).astype(np.float64)
