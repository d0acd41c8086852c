"""Dense (n, c, h, w) float64 kernels with hand-written backward passes.

A tensor is a C-contiguous 4-D ``numpy.ndarray`` of float64. Every
forward function is pure; every ``*_grad`` function returns the gradient
of ``sum(dy * forward(...))`` with respect to the forward inputs.

The convolution, 2x2 max-pool and bilinear inner loops come from the
compiled ``_kernels`` extension when it is importable and from the numpy
fallback otherwise. Set ``SALBENCH_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels_py
from .errors import ContractError, ShapeError

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_k = _kernels_py
BACKEND = "python"


def set_backend(name: str) -> None:
    """Select ``"compiled"`` or ``"python"`` kernels for subsequent calls."""
    global _k, BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; reinstall with Cython available")
        _k, BACKEND = _compiled, "compiled"
    elif name == "python":
        _k, BACKEND = _kernels_py, "python"
    else:
        raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


if _compiled is not None and os.environ.get("SALBENCH_BACKEND", "").lower() != "python":
    set_backend("compiled")


def as_tensor(x) -> np.ndarray:
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 4:
        raise ShapeError(f"expected a 4-D (n, c, h, w) tensor, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class ConvParams:
    weight: np.ndarray  # (out_c, in_c, kh, kw)
    bias: np.ndarray  # (out_c,)
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        w = as_tensor(self.weight)
        b = np.ascontiguousarray(self.bias, dtype=np.float64).reshape(-1)
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} != out channels {w.shape[0]}")
        if self.stride < 1 or self.padding < 0:
            raise ShapeError(f"invalid stride/padding {self.stride}/{self.padding}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def same(cls, weight, bias=None) -> "ConvParams":
        """Stride 1 with (k - 1) / 2 zero padding; the kernel must be square and odd."""
        w = as_tensor(weight)
        kh, kw = w.shape[2:]
        if kh != kw or kh % 2 == 0:
            raise ShapeError(f"same padding needs an odd square kernel, got {kh}x{kw}")
        if bias is None:
            bias = np.zeros(w.shape[0])
        return cls(w, bias, 1, (kh - 1) // 2)

    @property
    def out_c(self) -> int:
        return self.weight.shape[0]

    @property
    def in_c(self) -> int:
        return self.weight.shape[1]

    def replace(self, weight=None, bias=None) -> "ConvParams":
        return ConvParams(
            self.weight if weight is None else weight,
            self.bias if bias is None else bias,
            self.stride,
            self.padding,
        )


# -- convolution -------------------------------------------------------------


def conv_output_hw(h: int, w: int, p: ConvParams) -> tuple[int, int]:
    kh, kw = p.weight.shape[2:]
    return (h + 2 * p.padding - kh) // p.stride + 1, (w + 2 * p.padding - kw) // p.stride + 1


def _check_conv(x: np.ndarray, p: ConvParams) -> None:
    if x.shape[1] != p.in_c:
        raise ShapeError(f"conv2d: input has {x.shape[1]} channels, kernel expects {p.in_c}")
    kh, kw = p.weight.shape[2:]
    if x.shape[2] + 2 * p.padding < kh or x.shape[3] + 2 * p.padding < kw:
        raise ShapeError(f"conv2d: non-positive output size for input {x.shape[2:]} and kernel {kh}x{kw}")


def conv2d(x, p: ConvParams) -> np.ndarray:
    """Cross-correlation plus bias with zero padding."""
    x = as_tensor(x)
    _check_conv(x, p)
    return _k.conv2d_forward(x, p.weight, p.bias, p.stride, p.padding)


def conv2d_grad(x, p: ConvParams, dy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns ``(dx, dweight, dbias)``."""
    x = as_tensor(x)
    dy = as_tensor(dy)
    _check_conv(x, p)
    expect = (x.shape[0], p.out_c) + conv_output_hw(x.shape[2], x.shape[3], p)
    if dy.shape != expect:
        raise ShapeError(f"conv2d_grad: dy shape {dy.shape} != output shape {expect}")
    return _k.conv2d_backward(x, p.weight, dy, p.stride, p.padding)


# -- pooling -------------------------------------------------------------------


def maxpool2(x) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pool.

    The second result holds, per output element, the flat index (``row * w + col``)
    of the winning input element within its (n, c) plane. Ties go to the first
    element in row-major window order.
    """
    x = as_tensor(x)
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {x.shape[2:]}")
    return _k.maxpool2_forward(x)


def maxpool2_grad(dy, argmax: np.ndarray, in_shape: Sequence[int]) -> np.ndarray:
    dy = as_tensor(dy)
    n, c, h, w = in_shape
    dx = np.zeros((n * c, h * w))
    rows = np.arange(n * c)[:, None]
    # windows are disjoint, so plain fancy assignment cannot collide
    dx[rows, argmax.reshape(n * c, -1)] = dy.reshape(n * c, -1)
    return dx.reshape(n, c, h, w)


def avgpool(x, rate: int) -> np.ndarray:
    """Non-overlapping ``rate x rate`` mean pool; window sums run row-major."""
    x = as_tensor(x)
    if rate < 1 or x.shape[2] % rate or x.shape[3] % rate:
        raise ShapeError(f"avgpool: spatial dims {x.shape[2:]} not divisible by rate {rate}")
    if rate == 1:
        return x.copy()
    acc = np.zeros((x.shape[0], x.shape[1], x.shape[2] // rate, x.shape[3] // rate))
    for dy in range(rate):
        for dx in range(rate):
            acc += x[:, :, dy::rate, dx::rate]
    return acc / (rate * rate)


def avgpool_grad(dy, rate: int) -> np.ndarray:
    dy = as_tensor(dy)
    if rate == 1:
        return dy.copy()
    g = dy / (rate * rate)
    return np.ascontiguousarray(np.repeat(np.repeat(g, rate, axis=2), rate, axis=3))


def adaptive_bins(size: int, out: int) -> list[tuple[int, int]]:
    """Bin ``i`` covers ``[floor(i*size/out), ceil((i+1)*size/out))``."""
    return [((i * size) // out, -((-(i + 1) * size) // out)) for i in range(out)]


def adaptive_avgpool(x, oh: int, ow: int) -> np.ndarray:
    x = as_tensor(x)
    h, w = x.shape[2:]
    if not (1 <= oh <= h and 1 <= ow <= w):
        raise ShapeError(f"adaptive_avgpool: output {oh}x{ow} must lie within input {h}x{w}")
    y = np.empty(x.shape[:2] + (oh, ow))
    for i, (r0, r1) in enumerate(adaptive_bins(h, oh)):
        for j, (c0, c1) in enumerate(adaptive_bins(w, ow)):
            y[:, :, i, j] = x[:, :, r0:r1, c0:c1].sum(axis=(2, 3)) / ((r1 - r0) * (c1 - c0))
    return y


def adaptive_avgpool_grad(dy, in_shape: Sequence[int]) -> np.ndarray:
    dy = as_tensor(dy)
    h, w = in_shape[2], in_shape[3]
    oh, ow = dy.shape[2:]
    dx = np.zeros(tuple(in_shape))
    for i, (r0, r1) in enumerate(adaptive_bins(h, oh)):
        for j, (c0, c1) in enumerate(adaptive_bins(w, ow)):
            dx[:, :, r0:r1, c0:c1] += (dy[:, :, i, j] / ((r1 - r0) * (c1 - c0)))[:, :, None, None]
    return dx


def global_maxpool(x) -> tuple[np.ndarray, np.ndarray]:
    """Per-plane max to (n, c, 1, 1); the index is the first row-major maximum."""
    x = as_tensor(x)
    flat = x.reshape(x.shape[0], x.shape[1], -1)
    idx = flat.argmax(axis=2)
    return np.take_along_axis(flat, idx[..., None], axis=2)[..., None], idx


def global_maxpool_grad(dy, idx: np.ndarray, in_shape: Sequence[int]) -> np.ndarray:
    n, c, h, w = in_shape
    dx = np.zeros((n, c, h * w))
    np.put_along_axis(dx, idx[..., None], as_tensor(dy).reshape(n, c, 1), axis=2)
    return dx.reshape(n, c, h, w)


def channel_mean(x) -> np.ndarray:
    """Mean over channels to (n, 1, h, w); channels are summed in index order."""
    x = as_tensor(x)
    acc = x[:, 0].copy()
    for ch in range(1, x.shape[1]):
        acc += x[:, ch]
    return (acc / x.shape[1])[:, None]


def channel_mean_grad(dy, c: int) -> np.ndarray:
    return np.ascontiguousarray(np.repeat(as_tensor(dy) / c, c, axis=1))


def channel_max(x) -> tuple[np.ndarray, np.ndarray]:
    """Max over channels to (n, 1, h, w) plus the winning channel (first on ties)."""
    x = as_tensor(x)
    idx = x.argmax(axis=1)
    return np.take_along_axis(x, idx[:, None], axis=1), idx


def channel_max_grad(dy, idx: np.ndarray, c: int) -> np.ndarray:
    dy = as_tensor(dy)
    dx = np.zeros((dy.shape[0], c) + dy.shape[2:])
    np.put_along_axis(dx, idx[:, None], dy, axis=1)
    return dx


# -- resampling ------------------------------------------------------------------


def upsample_bilinear(x, oh: int, ow: int) -> np.ndarray:
    """Half-pixel bilinear resize: ``src = (dst + 0.5) * in / out - 0.5``, clamped."""
    x = as_tensor(x)
    if oh < x.shape[2] or ow < x.shape[3]:
        raise ShapeError(f"upsample_bilinear cannot shrink {x.shape[2:]} to {(oh, ow)}")
    if (oh, ow) == x.shape[2:]:
        return x.copy()
    return _k.upsample_bilinear_forward(x, oh, ow)


def upsample_bilinear_grad(dy, h: int, w: int) -> np.ndarray:
    dy = as_tensor(dy)
    if dy.shape[2:] == (h, w):
        return dy.copy()
    return _k.upsample_bilinear_backward(dy, h, w)


# -- pointwise ---------------------------------------------------------------------

_SIG_LO = np.finfo(np.float64).tiny
_SIG_HI = np.nextafter(1.0, 0.0)


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    # saturated float64 values would otherwise round to exactly 0 or 1
    return np.clip(y, _SIG_LO, _SIG_HI)


ACTIVATIONS = ("sigmoid", "tanh", "relu", "abs")


def activation(x, kind: str) -> np.ndarray:
    x = as_tensor(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "abs":
        return np.abs(x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(x, dy, kind: str) -> np.ndarray:
    x = as_tensor(x)
    dy = as_tensor(dy)
    if kind == "sigmoid":
        s = sigmoid(x)
        return dy * s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(x)
        return dy * (1.0 - t * t)
    if kind == "relu":
        return dy * (x > 0)
    if kind == "abs":
        return dy * np.sign(x)
    raise ValueError(f"unknown activation {kind!r}")


def _broadcast_kind(a: np.ndarray, b: np.ndarray) -> str:
    if a.shape == b.shape:
        return "full"
    n, c, h, w = a.shape
    if b.shape == (n, c, 1, 1):
        return "channel"
    if b.shape == (n, 1, h, w):
        return "spatial"
    raise ShapeError(f"eltwise: cannot broadcast {b.shape} against {a.shape}")


def eltwise(a, b, op: str) -> np.ndarray:
    """``a + b`` or ``a * b``; ``b`` may be (n, c, 1, 1) or (n, 1, h, w)."""
    a = as_tensor(a)
    b = as_tensor(b)
    _broadcast_kind(a, b)
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown eltwise op {op!r}")


def eltwise_grad(a, b, dy, op: str) -> tuple[np.ndarray, np.ndarray]:
    a = as_tensor(a)
    b = as_tensor(b)
    dy = as_tensor(dy)
    kind = _broadcast_kind(a, b)
    if op == "add":
        da, db_full = dy.copy(), dy
    elif op == "mul":
        da, db_full = dy * b, dy * a
    else:
        raise ValueError(f"unknown eltwise op {op!r}")
    if kind == "channel":
        db = db_full.sum(axis=(2, 3), keepdims=True)
    elif kind == "spatial":
        db = db_full.sum(axis=1, keepdims=True)
    else:
        db = db_full.copy()
    return da, db


def concat_channels(parts: Sequence) -> np.ndarray:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_channels needs at least one part")
    n, _, h, w = parts[0].shape
    for p in parts[1:]:
        if (p.shape[0], p.shape[2], p.shape[3]) != (n, h, w):
            raise ShapeError(f"concat_channels: part {p.shape} does not match n,h,w={n, h, w}")
    return np.concatenate(parts, axis=1)


def concat_channels_grad(dy, channels: Sequence[int]) -> list[np.ndarray]:
    dy = as_tensor(dy)
    splits = np.cumsum(channels)[:-1]
    return [np.ascontiguousarray(g) for g in np.split(dy, splits, axis=1)]


# -- gradient checking ---------------------------------------------------------------


def grad_check(
    f: Callable[..., tuple[float, Sequence[np.ndarray]]],
    inputs: Sequence[np.ndarray],
    h: float = 1e-5,
    coords: Sequence[Sequence[int]] | None = None,
    value_fn: Callable[..., float] | None = None,
) -> float:
    """Max over input elements of ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.

    ``f(*inputs)`` must return ``(value, grads)`` where ``value`` is a scalar
    and ``grads[i]`` has the shape of ``inputs[i]``. The numeric gradient is
    the central difference with step ``h``. ``coords`` optionally restricts
    the check to the given flat indices per input (all elements by default).
    ``value_fn(*inputs)`` may supply the scalar alone for the perturbed
    evaluations, skipping a costly backward pass.
    """
    if not 1e-6 <= h <= 1e-4:
        raise ContractError(f"step h={h} outside [1e-6, 1e-4]")
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    value, grads = f(*inputs)
    if value_fn is None:
        value_fn = lambda *xs: f(*xs)[0]  # noqa: E731
    if np.ndim(value) != 0 and np.size(value) != 1:
        raise ContractError(f"grad_check needs a scalar function, got shape {np.shape(value)}")
    worst = 0.0
    for k, x in enumerate(inputs):
        g = np.asarray(grads[k], dtype=np.float64).reshape(-1)
        if g.size != x.size:
            raise ContractError(f"gradient {k} has {g.size} elements, input has {x.size}")
        flat = x.reshape(-1)
        idx = range(flat.size) if coords is None else coords[k]
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(value_fn(*inputs))
            flat[i] = orig - h
            fm = float(value_fn(*inputs))
            flat[i] = orig
            num = (fp - fm) / (2.0 * h)
            err = abs(g[i] - num) / max(1.0, abs(g[i]), abs(num))
            worst = max(worst, err)
    return worst
