"""Attention and aggregation operators of the two-stream fusion network.

Each operator comes as a plain forward (``channel_attention``), a
``*_fwd`` returning ``(output, cache)`` and a ``*_bwd`` mapping
``(cache, dy)`` to the input gradient and a parameter-gradient bundle of
the same dataclass type as the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .tensor import ConvParams

PPM_BINS = (1, 3, 5)  # adaptive pool sizes of the three pooled branches; the fourth is identity
FAM_RATES = (1, 2, 4, 8)


def _conv_grad_params(p: ConvParams, dw: np.ndarray, db: np.ndarray) -> ConvParams:
    return ConvParams(dw, db, p.stride, p.padding)


@dataclass(frozen=True)
class CbamParams:
    ca_reduce: ConvParams  # 1x1, c -> c/r
    ca_expand: ConvParams  # 1x1, c/r -> c
    sa_conv: ConvParams  # kxk same padding, 2 -> 1

    def __post_init__(self):
        c = self.ca_expand.out_c
        if self.ca_reduce.in_c != c or self.ca_reduce.out_c != self.ca_expand.in_c:
            raise ShapeError("channel attention convs do not chain c -> c/r -> c")
        if self.sa_conv.in_c != 2 or self.sa_conv.out_c != 1:
            raise ShapeError("spatial attention conv must map 2 -> 1 channels")

    @property
    def channels(self) -> int:
        return self.ca_expand.out_c

    @property
    def r(self) -> int:
        return self.channels // self.ca_reduce.out_c

    @property
    def k(self) -> int:
        return self.sa_conv.weight.shape[2]


@dataclass(frozen=True)
class PpmParams:
    branch_convs: tuple[ConvParams, ConvParams, ConvParams, ConvParams]  # 1x1, c -> c/4
    fuse_conv: ConvParams  # 3x3, c -> c_out

    def __post_init__(self):
        if len(self.branch_convs) != 4:
            raise ShapeError(f"PPM needs exactly four branches, got {len(self.branch_convs)}")
        object.__setattr__(self, "branch_convs", tuple(self.branch_convs))


@dataclass(frozen=True)
class FamParams:
    fuse_conv: ConvParams  # 3x3, c -> c
    branch_rates: tuple[int, ...] = FAM_RATES

    def __post_init__(self):
        if len(self.branch_rates) != 4:
            raise ShapeError(f"FAM needs exactly four branches, got {len(self.branch_rates)}")


# -- channel attention -------------------------------------------------------------


def channel_attention_fwd(x, p: CbamParams):
    x = T.as_tensor(x)
    if x.shape[1] != p.channels:
        raise ShapeError(f"channel_attention: input has {x.shape[1]} channels, params expect {p.channels}")
    avg = T.adaptive_avgpool(x, 1, 1)
    mx, mx_idx = T.global_maxpool(x)
    h_avg = T.conv2d(avg, p.ca_reduce)
    h_max = T.conv2d(mx, p.ca_reduce)
    r_avg = np.maximum(h_avg, 0.0)
    r_max = np.maximum(h_max, 0.0)
    z = T.conv2d(r_avg, p.ca_expand) + T.conv2d(r_max, p.ca_expand)
    s = T.sigmoid(z)
    y = x * s
    return y, (x, p, avg, mx, mx_idx, h_avg, h_max, r_avg, r_max, s)


def channel_attention_bwd(cache, dy):
    x, p, avg, mx, mx_idx, h_avg, h_max, r_avg, r_max, s = cache
    dy = T.as_tensor(dy)
    dx = dy * s
    ds = (dy * x).sum(axis=(2, 3), keepdims=True)
    dz = ds * s * (1.0 - s)
    dr_avg, dwe_a, dbe_a = T.conv2d_grad(r_avg, p.ca_expand, dz)
    dr_max, dwe_m, dbe_m = T.conv2d_grad(r_max, p.ca_expand, dz)
    dh_avg = dr_avg * (h_avg > 0)
    dh_max = dr_max * (h_max > 0)
    davg, dwr_a, dbr_a = T.conv2d_grad(avg, p.ca_reduce, dh_avg)
    dmx, dwr_m, dbr_m = T.conv2d_grad(mx, p.ca_reduce, dh_max)
    dx += T.adaptive_avgpool_grad(davg, x.shape)
    dx += T.global_maxpool_grad(dmx, mx_idx, x.shape)
    grads = CbamParams(
        _conv_grad_params(p.ca_reduce, dwr_a + dwr_m, dbr_a + dbr_m),
        _conv_grad_params(p.ca_expand, dwe_a + dwe_m, dbe_a + dbe_m),
        _conv_grad_params(p.sa_conv, np.zeros_like(p.sa_conv.weight), np.zeros_like(p.sa_conv.bias)),
    )
    return dx, grads


def channel_attention(x, p: CbamParams) -> np.ndarray:
    """Gate each channel plane by ``sigmoid(mlp(avgpool(x)) + mlp(maxpool(x)))``.

    The two pooled descriptors share the 1x1 reduce/expand pair, with a
    ReLU between them.
    """
    return channel_attention_fwd(x, p)[0]


# -- spatial attention ---------------------------------------------------------------


def spatial_attention_fwd(x, p: CbamParams):
    x = T.as_tensor(x)
    avg = T.channel_mean(x)
    mx, mx_idx = T.channel_max(x)
    desc = T.concat_channels([avg, mx])
    z = T.conv2d(desc, p.sa_conv)
    if z.shape[2:] != x.shape[2:]:
        raise ShapeError("spatial attention conv must preserve spatial dims (same padding)")
    s = T.sigmoid(z)
    return x * s, (x, p, desc, mx_idx, s)


def spatial_attention_bwd(cache, dy):
    x, p, desc, mx_idx, s = cache
    dy = T.as_tensor(dy)
    c = x.shape[1]
    dx = dy * s
    ds = (dy * x).sum(axis=1, keepdims=True)
    dz = ds * s * (1.0 - s)
    ddesc, dw, db = T.conv2d_grad(desc, p.sa_conv, dz)
    dx += T.channel_mean_grad(ddesc[:, 0:1], c)
    dx += T.channel_max_grad(ddesc[:, 1:2], mx_idx, c)
    grads = CbamParams(
        _conv_grad_params(p.ca_reduce, np.zeros_like(p.ca_reduce.weight), np.zeros_like(p.ca_reduce.bias)),
        _conv_grad_params(p.ca_expand, np.zeros_like(p.ca_expand.weight), np.zeros_like(p.ca_expand.bias)),
        _conv_grad_params(p.sa_conv, dw, db),
    )
    return dx, grads


def spatial_attention(x, p: CbamParams) -> np.ndarray:
    """Gate each pixel by a kxk conv over the channel-mean and channel-max maps."""
    return spatial_attention_fwd(x, p)[0]


def cbam_fwd(x, p: CbamParams):
    mc, c1 = channel_attention_fwd(x, p)
    ms, c2 = spatial_attention_fwd(mc, p)
    return ms, (c1, c2)


def cbam_bwd(cache, dy):
    c1, c2 = cache
    dmc, g2 = spatial_attention_bwd(c2, dy)
    dx, g1 = channel_attention_bwd(c1, dmc)
    return dx, CbamParams(g1.ca_reduce, g1.ca_expand, g2.sa_conv)


def cbam(x, p: CbamParams) -> np.ndarray:
    return cbam_fwd(x, p)[0]


# -- multi-layer fusion ---------------------------------------------------------------------


def fuse_stage_fwd(i: int, f_prev, m_rgb, m_t, merge: ConvParams | None):
    m_rgb = T.as_tensor(m_rgb)
    m_t = T.as_tensor(m_t)
    if not 1 <= i <= 5:
        raise ShapeError(f"block index {i} outside 1..5")
    if m_rgb.shape != m_t.shape:
        raise ShapeError(f"fuse_stage: modality shapes differ {m_rgb.shape} vs {m_t.shape}")
    if i == 1:
        if f_prev is not None or merge is not None:
            raise ShapeError("fuse_stage: block 1 takes no previous feature")
        return m_rgb + m_t, (i, None, None, None, None)
    if f_prev is None or merge is None:
        raise ShapeError(f"fuse_stage: block {i} needs the previous fused feature and a merge conv")
    f_prev = T.as_tensor(f_prev)
    if f_prev.shape[2:] == m_rgb.shape[2:]:
        pooled, argmax = f_prev, None
    elif f_prev.shape[2] == 2 * m_rgb.shape[2] and f_prev.shape[3] == 2 * m_rgb.shape[3]:
        pooled, argmax = T.maxpool2(f_prev)
    else:
        raise ShapeError(f"fuse_stage: previous feature {f_prev.shape[2:]} cannot reach {m_rgb.shape[2:]}")
    merged = T.conv2d(pooled, merge)
    if merged.shape != m_rgb.shape:
        raise ShapeError(f"fuse_stage: merged feature {merged.shape} != {m_rgb.shape}")
    return merged + m_rgb + m_t, (i, f_prev.shape, pooled, argmax, merge)


def fuse_stage_bwd(cache, dy):
    """Returns ``(df_prev, dm_rgb, dm_t, dmerge)``; the first and last are None at block 1."""
    i, prev_shape, pooled, argmax, merge = cache
    dy = T.as_tensor(dy)
    if i == 1:
        return None, dy.copy(), dy.copy(), None
    dpooled, dw, db = T.conv2d_grad(pooled, merge, dy)
    df_prev = dpooled if argmax is None else T.maxpool2_grad(dpooled, argmax, prev_shape)
    return df_prev, dy.copy(), dy.copy(), _conv_grad_params(merge, dw, db)


def fuse_stage(i: int, f_prev, m_rgb, m_t, merge: ConvParams | None = None) -> np.ndarray:
    """Block 1: ``m_rgb + m_t``. Later blocks: ``conv(down(f_prev)) + m_rgb + m_t``.

    ``down`` is a 2x2 max pool when ``f_prev`` has twice the resolution of
    the block features and the identity when resolutions already agree.
    """
    return fuse_stage_fwd(i, f_prev, m_rgb, m_t, merge)[0]


# -- pyramid pooling -----------------------------------------------------------------------


def ppm_fwd(x, p: PpmParams):
    x = T.as_tensor(x)
    h, w = x.shape[2:]
    if h < max(PPM_BINS) or w < max(PPM_BINS):
        raise ShapeError(f"ppm: input {h}x{w} smaller than {max(PPM_BINS)}x{max(PPM_BINS)}")
    branch_caches = []
    outs = []
    for b, conv in enumerate(p.branch_convs):
        pooled = T.adaptive_avgpool(x, PPM_BINS[b], PPM_BINS[b]) if b < 3 else x
        z = T.conv2d(pooled, conv)
        outs.append(T.upsample_bilinear(z, h, w))
        branch_caches.append((pooled, z.shape))
    cat = T.concat_channels(outs)
    y = T.conv2d(cat, p.fuse_conv)
    return y, (x, p, branch_caches, cat)


def ppm_bwd(cache, dy):
    x, p, branch_caches, cat = cache
    h, w = x.shape[2:]
    dcat, dwf, dbf = T.conv2d_grad(cat, p.fuse_conv, dy)
    douts = T.concat_channels_grad(dcat, [c.out_c for c in p.branch_convs])
    dx = np.zeros_like(x)
    branch_grads = []
    for b, conv in enumerate(p.branch_convs):
        pooled, zshape = branch_caches[b]
        dz = T.upsample_bilinear_grad(douts[b], zshape[2], zshape[3])
        dpooled, dw, db = T.conv2d_grad(pooled, conv, dz)
        branch_grads.append(_conv_grad_params(conv, dw, db))
        dx += T.adaptive_avgpool_grad(dpooled, x.shape) if b < 3 else dpooled
    return dx, PpmParams(tuple(branch_grads), _conv_grad_params(p.fuse_conv, dwf, dbf))


def ppm_forward(x, p: PpmParams) -> np.ndarray:
    """Global guidance feature from pooled branches {1x1, 3x3, 5x5, identity}."""
    return ppm_fwd(x, p)[0]


# -- feature aggregation ---------------------------------------------------------------------


def fam_fwd(x, p: FamParams):
    x = T.as_tensor(x)
    h, w = x.shape[2:]
    top = max(p.branch_rates)
    if h % top or w % top:
        raise ShapeError(f"fam: spatial dims {h}x{w} not divisible by {top}")
    acc = np.zeros_like(x)
    for rate in p.branch_rates:
        acc += T.upsample_bilinear(T.avgpool(x, rate), h, w)
    y = T.conv2d(acc, p.fuse_conv)
    return y, (x, p, acc)


def fam_bwd(cache, dy):
    x, p, acc = cache
    h, w = x.shape[2:]
    dacc, dw, db = T.conv2d_grad(acc, p.fuse_conv, dy)
    dx = np.zeros_like(x)
    for rate in p.branch_rates:
        dx += T.avgpool_grad(T.upsample_bilinear_grad(dacc, h // rate, w // rate), rate)
    return dx, FamParams(_conv_grad_params(p.fuse_conv, dw, db), p.branch_rates)


def fam_forward(x, p: FamParams) -> np.ndarray:
    """Sum of avg-pool/upsample branches at rates {1, 2, 4, 8}, then a 3x3 conv."""
    return fam_fwd(x, p)[0]
