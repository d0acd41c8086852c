"""Flat binary container for network parameters.

Layout (all integers little-endian)::

    magic    8 bytes   b"SALBNET\\0"
    version  u32
    cfg_len  u32, then cfg_len bytes of UTF-8 JSON (NetConfig fields)
    count    u32
    count records, in ``network.named_arrays`` order:
        name_len u16, name (UTF-8)
        ndim     u8,  dims (u32 each)
        payload  prod(dims) float64 values, little-endian, C order
"""

from __future__ import annotations

import io
import json
import os
import struct

import numpy as np

from . import network as N
from .errors import ConfigError, MissingInputError

MAGIC = b"SALBNET\0"
VERSION = 1


class WeightsFormatError(ConfigError):
    """The byte stream is not a valid parameter container for this network."""


def config_to_dict(cfg: N.NetConfig) -> dict:
    return {"channels": list(cfg.channels), "r": cfg.r, "k": cfg.k, "decoder": cfg.decoder}


def config_from_dict(d: dict) -> N.NetConfig:
    try:
        return N.NetConfig(channels=tuple(d["channels"]), r=int(d["r"]), k=int(d["k"]), decoder=int(d["decoder"]))
    except (KeyError, TypeError) as exc:
        raise WeightsFormatError(f"bad network config {d!r}: {exc}") from None


def dumps(net: N.AdfNetToy) -> bytes:
    buf = io.BytesIO()
    cfg = json.dumps(config_to_dict(net.config), sort_keys=True).encode("utf-8")
    arrays = list(N.named_arrays(net))
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<I", len(arrays)))
    for name, a in arrays:
        nb = name.encode("utf-8")
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", a.ndim))
        buf.write(struct.pack(f"<{a.ndim}I", *a.shape))
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightsFormatError(f"truncated container at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes) -> N.AdfNetToy:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise WeightsFormatError("bad magic; not a parameter container")
    version, cfg_len = r.unpack("<II")
    if version != VERSION:
        raise WeightsFormatError(f"unsupported container version {version}")
    try:
        cfg = config_from_dict(json.loads(r.take(cfg_len).decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightsFormatError(f"bad config block: {exc}") from None
    template = N._conv_shapes(cfg)
    expected = list(N.named_arrays(template))
    (count,) = r.unpack("<I")
    if count != len(expected):
        raise WeightsFormatError(f"container holds {count} arrays, network needs {len(expected)}")
    loaded = []
    for name, ref in expected:
        (nlen,) = r.unpack("<H")
        got = r.take(nlen).decode("utf-8", errors="replace")
        (ndim,) = r.unpack("<B")
        dims = r.unpack(f"<{ndim}I")
        if got != name or tuple(dims) != ref.shape:
            raise WeightsFormatError(f"record {got!r} {tuple(dims)} does not match expected {name!r} {ref.shape}")
        size = int(np.prod(dims)) if dims else 1
        loaded.append(np.frombuffer(r.take(8 * size), dtype="<f8").astype(np.float64).reshape(dims))
    if r.pos != len(data):
        raise WeightsFormatError(f"{len(data) - r.pos} trailing bytes after the last record")
    it = iter(loaded)
    return N.tree_map(lambda _: next(it), template)


def save(net: N.AdfNetToy, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(net))


def load(path: str | os.PathLike) -> N.AdfNetToy:
    if not os.path.isfile(path):
        raise MissingInputError(f"weights file {str(path)!r} not found")
    with open(path, "rb") as fh:
        return loads(fh.read())

