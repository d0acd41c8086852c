"""Binary PGM (P5) and PPM (P6) with maxval 255."""

from __future__ import annotations

import os

import numpy as np

from .errors import ImageFormatError


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` header tokens (comments skipped) and the offset after the single trailing whitespace."""
    toks: list[bytes] = []
    i, n = 0, len(data)
    while len(toks) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i >= n:
            raise ImageFormatError("truncated header")
        if data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        toks.append(data[i:j])
        i = j
    if i >= n or not data[i : i + 1].isspace():
        raise ImageFormatError("missing whitespace after header")
    return toks, i + 1


def decode(data: bytes) -> np.ndarray:
    """Returns uint8 ``(h, w)`` for P5 and ``(h, w, 3)`` for P6."""
    toks, off = _tokens(data, 4)
    magic = toks[0]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic!r}; only P5/P6 are read")
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise ImageFormatError(f"bad header field: {exc}") from None
    if w <= 0 or h <= 0:
        raise ImageFormatError(f"bad dimensions {w}x{h}")
    if maxval != 255:
        raise ImageFormatError(f"maxval must be 255, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    size = w * h * channels
    body = data[off : off + size]
    if len(body) != size:
        raise ImageFormatError(f"expected {size} pixel bytes, got {len(body)}")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape(h, w) if channels == 1 else arr.reshape(h, w, 3)


def encode(img) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ImageFormatError(f"pixels must be uint8, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ImageFormatError(f"cannot encode array of shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def read(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())


def write(path: str | os.PathLike, img) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(img))
