"""Embedding table file: JSON header + packed f32 payload.

Layout: u32 header length | UTF-8 JSON {d_h, entries: [{text, offset}]} |
f32 little-endian payload. Offsets count floats; entry i spans
[offset, offset + d_h).
"""
from __future__ import annotations

import json
import struct

import numpy as np

from semsplat.errors import InvalidParameterError


def write_embedding_table(path, table):
    """table: dict text -> (d_h,) array (all the same length)."""
    if not table:
        raise InvalidParameterError("refusing to write an empty embedding table")
    texts = list(table.keys())
    d_h = len(np.asarray(table[texts[0]]))
    entries = []
    payload = []
    offset = 0
    for text in texts:
        vec = np.asarray(table[text], dtype="<f4")
        if vec.shape != (d_h,):
            raise InvalidParameterError("inconsistent embedding widths in table")
        entries.append({"text": text, "offset": offset})
        payload.append(vec)
        offset += d_h
    header = json.dumps({"d_h": d_h, "entries": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.concatenate(payload).tobytes())


def read_embedding_table(path):
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<f4")
    d_h = header["d_h"]
    table = {}
    for entry in header["entries"]:
        off = entry["offset"]
        table[entry["text"]] = payload[off : off + d_h].astype(np.float64)
    return table
