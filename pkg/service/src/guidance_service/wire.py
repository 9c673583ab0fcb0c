"""Wire-format tensor codec: base64 little-endian f32 + explicit shape.

This mirrors the consumer side of the protocol; both ends treat the format
as the contract, not a shared library.
"""
from __future__ import annotations

import base64

import numpy as np


class WireError(ValueError):
    pass


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
        raise WireError(f"malformed tensor payload: {err}")
    arr = np.frombuffer(raw, dtype="<f4")
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise WireError("tensor payload size does not match shape")
    return arr.reshape(shape)
