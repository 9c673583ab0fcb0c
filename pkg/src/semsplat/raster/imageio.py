"""Image export: 8-bit PNG previews and lossless IMG1 float dumps.

IMG1 layout (little-endian): magic b"IMG1" | u32 H | u32 W | u32 C | f32 data
row-major.
"""
from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from semsplat.errors import InvalidParameterError

IMG_MAGIC = b"IMG1"


def write_png(path, image):
    """Clamp to [0,1], quantize to 8-bit, write PNG."""
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    if arr.ndim == 2:
        arr = arr[:, :, None].repeat(3, axis=2)
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(data).save(path)


def write_float_image(path, image):
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    with open(path, "wb") as fh:
        fh.write(IMG_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(arr.astype("<f4").tobytes())


def read_float_image(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != IMG_MAGIC:
            raise InvalidParameterError(f"{path}: not an IMG1 file")
        h, w, c = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != h * w * c:
        raise InvalidParameterError(f"{path}: truncated image payload")
    return data.reshape(h, w, c).astype(np.float64)
