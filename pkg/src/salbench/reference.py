"""Brute-force scalar references used as oracles by the self-check and tests.

Most functions are explicit per-element loops written straight from the
definitions; ``threshold_counts`` binarizes once per threshold instead of
using histograms. None of this shares code with the vectorized or
compiled paths. The loops are slow on purpose; keep inputs tiny.
"""

from __future__ import annotations

import math

import numpy as np


def conv2d(x, w, b, stride: int = 1, pad: int = 0) -> np.ndarray:
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((n, oc, oh, ow))
    for i in range(n):
        for o in range(oc):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for ky in range(kh):
                            for kx in range(kw):
                                iy = oy * stride + ky - pad
                                ix = ox * stride + kx - pad
                                if 0 <= iy < h and 0 <= ix < wd:
                                    acc += float(w[o, ci, ky, kx]) * float(x[i, ci, iy, ix])
                    y[i, o, oy, ox] = acc + float(b[o])
    return y


def avgpool(x, rate: int) -> np.ndarray:
    n, c, h, w = x.shape
    y = np.zeros((n, c, h // rate, w // rate))
    for i in range(n):
        for ch in range(c):
            for oy in range(h // rate):
                for ox in range(w // rate):
                    s = 0.0
                    for dy in range(rate):
                        for dx in range(rate):
                            s += float(x[i, ch, oy * rate + dy, ox * rate + dx])
                    y[i, ch, oy, ox] = s / (rate * rate)
    return y


def adaptive_avgpool(x, oh: int, ow: int) -> np.ndarray:
    n, c, h, w = x.shape
    y = np.zeros((n, c, oh, ow))
    for i in range(n):
        for ch in range(c):
            for oy in range(oh):
                r0 = math.floor(oy * h / oh)
                r1 = math.ceil((oy + 1) * h / oh)
                for ox in range(ow):
                    c0 = math.floor(ox * w / ow)
                    c1 = math.ceil((ox + 1) * w / ow)
                    s = 0.0
                    for yy in range(r0, r1):
                        for xx in range(c0, c1):
                            s += float(x[i, ch, yy, xx])
                    y[i, ch, oy, ox] = s / ((r1 - r0) * (c1 - c0))
    return y


def maxpool2(x) -> np.ndarray:
    n, c, h, w = x.shape
    y = np.zeros((n, c, h // 2, w // 2))
    for i in range(n):
        for ch in range(c):
            for oy in range(h // 2):
                for ox in range(w // 2):
                    y[i, ch, oy, ox] = max(
                        float(x[i, ch, 2 * oy + a, 2 * ox + b]) for a in range(2) for b in range(2)
                    )
    return y


def _bilinear_taps(d: int, insize: int, outsize: int) -> tuple[int, int, float]:
    src = (d + 0.5) * insize / outsize - 0.5
    src = min(max(src, 0.0), insize - 1.0)
    i0 = int(math.floor(src))
    i1 = min(i0 + 1, insize - 1)
    return i0, i1, src - i0


def upsample_bilinear(x, oh: int, ow: int) -> np.ndarray:
    """Weighted four-tap form ``sum w_ab * x_ab`` of half-pixel bilinear resizing."""
    n, c, h, w = x.shape
    y = np.zeros((n, c, oh, ow))
    for oy in range(oh):
        y0, y1, ty = _bilinear_taps(oy, h, oh)
        for ox in range(ow):
            x0, x1, tx = _bilinear_taps(ox, w, ow)
            for i in range(n):
                for ch in range(c):
                    y[i, ch, oy, ox] = (
                        (1 - ty) * (1 - tx) * x[i, ch, y0, x0]
                        + (1 - ty) * tx * x[i, ch, y0, x1]
                        + ty * (1 - tx) * x[i, ch, y1, x0]
                        + ty * tx * x[i, ch, y1, x1]
                    )
    return y


def _sig(v: float) -> float:
    return 1.0 / (1.0 + math.exp(-v))


def channel_attention(x, w1, b1, w2, b2) -> np.ndarray:
    """Scalar channel gate; ``w1`` is (c/r, c), ``w2`` is (c, c/r)."""
    n, c, h, w = x.shape
    hid = w1.shape[0]
    y = np.zeros_like(x)
    for i in range(n):
        avg = [sum(float(v) for v in x[i, ch].ravel()) / (h * w) for ch in range(c)]
        mx = [max(float(v) for v in x[i, ch].ravel()) for ch in range(c)]

        def mlp(d):
            hidden = [max(0.0, sum(w1[j, k] * d[k] for k in range(c)) + b1[j]) for j in range(hid)]
            return [sum(w2[k, j] * hidden[j] for j in range(hid)) + b2[k] for k in range(c)]

        za, zm = mlp(avg), mlp(mx)
        for ch in range(c):
            y[i, ch] = x[i, ch] * _sig(za[ch] + zm[ch])
    return y


def spatial_attention(x, wk, bk) -> np.ndarray:
    """Scalar spatial gate; ``wk`` is (2, k, k) acting on [mean, max] maps with zero padding."""
    n, c, h, w = x.shape
    k = wk.shape[1]
    pad = k // 2
    y = np.zeros_like(x)
    for i in range(n):
        mean = [[sum(float(x[i, ch, a, b]) for ch in range(c)) / c for b in range(w)] for a in range(h)]
        mx = [[max(float(x[i, ch, a, b]) for ch in range(c)) for b in range(w)] for a in range(h)]
        for a in range(h):
            for b in range(w):
                z = float(bk)
                for ky in range(k):
                    for kx in range(k):
                        yy, xx = a + ky - pad, b + kx - pad
                        if 0 <= yy < h and 0 <= xx < w:
                            z += wk[0, ky, kx] * mean[yy][xx] + wk[1, ky, kx] * mx[yy][xx]
                s = _sig(z)
                for ch in range(c):
                    y[i, ch, a, b] = x[i, ch, a, b] * s
    return y


LAPLACE_STENCIL = ((-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0), (0, 0, -4.0))


def laplacian_boundary(img) -> np.ndarray:
    """``|tanh(.)|`` of the five-point Laplacian of a 2-D array, zero outside."""
    h, w = img.shape
    out = np.zeros((h, w))
    for a in range(h):
        for b in range(w):
            s = 0.0
            for dy, dx, coef in LAPLACE_STENCIL:
                yy, xx = a + dy, b + dx
                if 0 <= yy < h and 0 <= xx < w:
                    s += coef * float(img[yy, xx])
            out[a, b] = abs(math.tanh(s))
    return out


def bce(p, t, eps: float = 1e-7) -> float:
    total = 0.0
    for pv, tv in zip(np.ravel(p), np.ravel(t)):
        pv = min(max(float(pv), eps), 1.0 - eps)
        total -= tv * math.log(pv) + (1.0 - tv) * math.log(1.0 - pv)
    return total / np.size(p)


def threshold_counts(sal, gt) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """tp/fp/fn for all 256 thresholds, one separate binarization pass per threshold."""
    sal = np.asarray(sal).astype(np.int64)
    pos = np.asarray(gt).astype(bool)
    tp = np.zeros(256, dtype=np.int64)
    fp = np.zeros(256, dtype=np.int64)
    fn = np.zeros(256, dtype=np.int64)
    for t in range(256):
        pred = sal >= t
        tp[t] = np.count_nonzero(pred & pos)
        fp[t] = np.count_nonzero(pred & ~pos)
        fn[t] = np.count_nonzero(~pred & pos)
    return tp, fp, fn


def cooccurrence(tag_sets, codes) -> np.ndarray:
    m = np.zeros((len(codes), len(codes)), dtype=np.int64)
    for i, a in enumerate(codes):
        for j, b in enumerate(codes):
            m[i, j] = sum(1 for s in tag_sets if a in s and b in s)
    return m
