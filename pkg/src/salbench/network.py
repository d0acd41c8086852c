"""Desk-scale two-stream fusion network, its backward pass and SGD training.

Layout per stream (RGB with 3 input channels, thermal with 1): five conv
blocks of two 3x3 convs + ReLU. Blocks 2-4 start with a 2x2 max pool;
block 5 keeps block 4's resolution, so for an ``H x W`` input the block
resolutions are H, H/2, H/4, H/8, H/8. Every block output passes through
its own CBAM before fusion. The fused pyramid F1..F5 feeds a pyramid
pooling module (on F5) and a top-down decoder over levels 5..2:

    d5 = FAM5(lat5(F5) + G)
    dL = FAM_L(lat_L(F_L) + up(d_{L+1}) + up(G))      L = 4, 3, 2
    out = up(sigmoid(head(d2)))                        to H x W

where G is the PPM output and ``lat_L`` a 1x1 projection to the decoder
width. The sum inside each FAM call is scaled by ``DECODER_SCALE`` and
the raw pixels are centred and scaled before the first block. ``H`` must
be a multiple of 64 because F5 (at H/8) feeds a FAM with an 8x8 pooling
branch.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import fusion as Fu
from . import losses
from . import tensor as T
from .errors import ConfigError, ContractError, ShapeError
from .fusion import CbamParams, FamParams, PpmParams
from .rng import Pcg32
from .tensor import ConvParams

POOL_BEFORE = (False, True, True, True, False)
INPUT_MULTIPLE = 64
# Pixels in [0, 1] enter the streams as (x - INPUT_CENTER) * INPUT_GAIN.
INPUT_CENTER = 0.5
INPUT_GAIN = 4.0
# Each FAM sums four branches, so an unscaled decoder multiplies smooth
# components by about 4 per level (about 256 over four levels). The FAM
# input is scaled by 1/4 to keep the decoder near unit gain.
DECODER_SCALE = 1.0 / len(Fu.FAM_RATES)
# Denominator floor for the edge-loss gradient used by train_step.
TRAIN_EDGE_FLOOR = 0.1


@dataclass(frozen=True)
class NetConfig:
    channels: tuple[int, ...] = (8, 16, 32, 32, 32)
    r: int = 4
    k: int = 7
    decoder: int = 16

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != 5 or min(self.channels) < 1:
            raise ConfigError(f"need five positive block widths, got {self.channels}")
        if self.r < 1 or any(c % self.r for c in self.channels):
            raise ConfigError(f"every block width must be divisible by r={self.r}")
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError(f"spatial kernel k={self.k} must be odd")
        if self.channels[4] % 4:
            raise ConfigError(f"last block width {self.channels[4]} must be divisible by 4 (PPM)")
        if self.decoder < 1:
            raise ConfigError("decoder width must be positive")


@dataclass(frozen=True)
class AdfNetToy:
    config: NetConfig
    rgb_blocks: tuple[tuple[ConvParams, ConvParams], ...]
    t_blocks: tuple[tuple[ConvParams, ConvParams], ...]
    cbam_rgb: tuple[CbamParams, ...]
    cbam_t: tuple[CbamParams, ...]
    merge_convs: tuple[ConvParams, ...]  # blocks 2..5
    ppm: PpmParams
    laterals: tuple[ConvParams, ...]  # levels 2..5
    fams: tuple[FamParams, ...]  # levels 2..5
    head: ConvParams


# -- parameter trees ---------------------------------------------------------------------


def _is_tree(obj) -> bool:
    return dataclasses.is_dataclass(obj) and not isinstance(obj, NetConfig)


def named_arrays(tree, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
    """All parameter arrays in the fixed enumeration order (dataclass field order, depth first)."""
    if isinstance(tree, np.ndarray):
        yield prefix, tree
    elif _is_tree(tree):
        for f in dataclasses.fields(tree):
            yield from named_arrays(getattr(tree, f.name), f"{prefix}.{f.name}" if prefix else f.name)
    elif isinstance(tree, tuple) and tree and not isinstance(tree[0], int):
        for i, item in enumerate(tree):
            yield from named_arrays(item, f"{prefix}.{i}")


def tree_map(fn: Callable[..., np.ndarray], tree, *others):
    """Rebuild ``tree`` with every array ``a`` replaced by ``fn(a, *matching arrays of others)``."""
    if isinstance(tree, np.ndarray):
        return fn(tree, *others)
    if _is_tree(tree):
        kwargs = {
            f.name: tree_map(fn, getattr(tree, f.name), *(getattr(o, f.name) for o in others))
            for f in dataclasses.fields(tree)
        }
        return type(tree)(**kwargs)
    if isinstance(tree, tuple) and tree and not isinstance(tree[0], int):
        return tuple(tree_map(fn, item, *(o[i] for o in others)) for i, item in enumerate(tree))
    return tree


def parameter_count(net: AdfNetToy) -> int:
    return sum(a.size for _, a in named_arrays(net))


# -- initialization ------------------------------------------------------------------------


def _conv_shapes(cfg: NetConfig) -> AdfNetToy:
    """Zero-filled network with every conv at its final shape and padding."""

    def conv(o, i, k):
        return ConvParams.same(np.zeros((o, i, k, k)), np.zeros(o))

    ch = cfg.channels

    def blocks(in_c):
        out, prev = [], in_c
        for c in ch:
            out.append((conv(c, prev, 3), conv(c, c, 3)))
            prev = c
        return tuple(out)

    def cbams():
        return tuple(CbamParams(conv(c // cfg.r, c, 1), conv(c, c // cfg.r, 1), conv(1, 2, cfg.k)) for c in ch)

    d = cfg.decoder
    return AdfNetToy(
        config=cfg,
        rgb_blocks=blocks(3),
        t_blocks=blocks(1),
        cbam_rgb=cbams(),
        cbam_t=cbams(),
        merge_convs=tuple(conv(ch[i], ch[i - 1], 3) for i in range(1, 5)),
        ppm=PpmParams(tuple(conv(ch[4] // 4, ch[4], 1) for _ in range(4)), conv(d, ch[4], 3)),
        laterals=tuple(conv(d, ch[i], 1) for i in range(1, 5)),
        fams=tuple(FamParams(conv(d, d, 3)) for _ in range(4)),
        head=conv(1, d, 3),
    )


def xavier_bound(weight_shape: tuple[int, ...]) -> float:
    out_c, in_c, kh, kw = weight_shape
    return math.sqrt(6.0 / (in_c * kh * kw + out_c * kh * kw))


def adfnet_init(config: NetConfig | None = None, seed: int = 0) -> AdfNetToy:
    """Xavier-uniform weights drawn from one PCG32 stream in ``named_arrays`` order; zero biases."""
    config = config or NetConfig()
    if not isinstance(config, NetConfig):
        raise ConfigError("config must be a NetConfig")
    rng = Pcg32(seed)

    def draw(a: np.ndarray) -> np.ndarray:
        if a.ndim == 1:
            return np.zeros_like(a)
        b = xavier_bound(a.shape)
        return rng.uniform(-b, b, a.shape)

    return tree_map(draw, _conv_shapes(config))


# -- forward / backward --------------------------------------------------------------------


def _check_inputs(net: AdfNetToy, rgb, t) -> tuple[np.ndarray, np.ndarray]:
    rgb = T.as_tensor(rgb)
    t = T.as_tensor(t)
    n, c, h, w = rgb.shape
    if c != 3 or t.shape != (n, 1, h, w):
        raise ShapeError(f"expected rgb (n,3,H,W) and thermal (n,1,H,W), got {rgb.shape} and {t.shape}")
    if h != w or h % INPUT_MULTIPLE:
        raise ShapeError(f"input must be square with side a multiple of {INPUT_MULTIPLE}, got {h}x{w}")
    return rgb, t


def _stream_fwd(blocks, cbams, x):
    feats, caches = [], []
    h = x
    for b in range(5):
        pool = None
        if POOL_BEFORE[b]:
            shape = h.shape
            h, am = T.maxpool2(h)
            pool = (am, shape)
        ca, cb = blocks[b]
        z1 = T.conv2d(h, ca)
        a1 = np.maximum(z1, 0.0)
        z2 = T.conv2d(a1, cb)
        a2 = np.maximum(z2, 0.0)
        ms, cbam_cache = Fu.cbam_fwd(a2, cbams[b])
        feats.append(ms)
        caches.append((pool, h, z1, a1, z2, cbam_cache))
        h = a2
    return feats, caches


def _stream_bwd(blocks, caches, dfeats):
    grads_blocks, grads_cbam = [None] * 5, [None] * 5
    dh_next = None
    for b in reversed(range(5)):
        pool, h_in, z1, a1, z2, cbam_cache = caches[b]
        da2, grads_cbam[b] = Fu.cbam_bwd(cbam_cache, dfeats[b])
        if dh_next is not None:
            da2 = da2 + dh_next
        dz2 = da2 * (z2 > 0)
        ca, cb = blocks[b]
        da1, dwb, dbb = T.conv2d_grad(a1, cb, dz2)
        dz1 = da1 * (z1 > 0)
        dh, dwa, dba = T.conv2d_grad(h_in, ca, dz1)
        grads_blocks[b] = (ca.replace(dwa, dba), cb.replace(dwb, dbb))
        if pool is not None:
            dh = T.maxpool2_grad(dh, pool[0], pool[1])
        dh_next = dh
    return tuple(grads_blocks), tuple(grads_cbam)


def _forward(net: AdfNetToy, rgb, t):
    rgb, t = _check_inputs(net, rgb, t)
    H, W = rgb.shape[2:]
    m_rgb, rgb_caches = _stream_fwd(net.rgb_blocks, net.cbam_rgb, (rgb - INPUT_CENTER) * INPUT_GAIN)
    m_t, t_caches = _stream_fwd(net.t_blocks, net.cbam_t, (t - INPUT_CENTER) * INPUT_GAIN)

    fused, fuse_caches = [], []
    f_prev = None
    for i in range(5):
        merge = net.merge_convs[i - 1] if i else None
        f_prev, fc = Fu.fuse_stage_fwd(i + 1, f_prev, m_rgb[i], m_t[i], merge)
        fused.append(f_prev)
        fuse_caches.append(fc)

    guide, ppm_cache = Fu.ppm_fwd(fused[4], net.ppm)
    decoded, dec_caches = {}, {}
    for lvl in (5, 4, 3, 2):
        j = lvl - 2
        feat = fused[lvl - 1]
        h, w = feat.shape[2:]
        s = T.conv2d(feat, net.laterals[j]) + T.upsample_bilinear(guide, h, w)
        if lvl < 5:
            s = s + T.upsample_bilinear(decoded[lvl + 1], h, w)
        decoded[lvl], dec_caches[lvl] = Fu.fam_fwd(s * DECODER_SCALE, net.fams[j])

    logits = T.conv2d(decoded[2], net.head)
    prob = T.sigmoid(logits)
    out = T.upsample_bilinear(prob, H, W)
    cache = (net, rgb_caches, t_caches, fused, fuse_caches, guide, ppm_cache, decoded, dec_caches, logits, prob)
    return out, cache


def _backward(cache, dout) -> AdfNetToy:
    net, rgb_caches, t_caches, fused, fuse_caches, guide, ppm_cache, decoded, dec_caches, logits, prob = cache
    dprob = T.upsample_bilinear_grad(dout, prob.shape[2], prob.shape[3])
    dlogits = dprob * prob * (1.0 - prob)
    dd2, dwh, dbh = T.conv2d_grad(decoded[2], net.head, dlogits)
    g_head = net.head.replace(dwh, dbh)

    dfused = [np.zeros_like(f) for f in fused]
    dguide = np.zeros_like(guide)
    g_lat, g_fam = [None] * 4, [None] * 4
    ddec = {2: dd2}
    for lvl in (2, 3, 4, 5):
        j = lvl - 2
        ds, g_fam[j] = Fu.fam_bwd(dec_caches[lvl], ddec[lvl])
        ds = ds * DECODER_SCALE
        gh, gw = guide.shape[2:]
        dguide += T.upsample_bilinear_grad(ds, gh, gw)
        if lvl < 5:
            nh, nw = decoded[lvl + 1].shape[2:]
            ddec[lvl + 1] = T.upsample_bilinear_grad(ds, nh, nw)
        dfeat, dwl, dbl = T.conv2d_grad(fused[lvl - 1], net.laterals[j], ds)
        dfused[lvl - 1] += dfeat
        g_lat[j] = net.laterals[j].replace(dwl, dbl)

    df5, g_ppm = Fu.ppm_bwd(ppm_cache, dguide)
    dfused[4] += df5

    dm_rgb, dm_t, g_merge = [None] * 5, [None] * 5, [None] * 4
    for i in reversed(range(5)):
        df_prev, dm_rgb[i], dm_t[i], g = Fu.fuse_stage_bwd(fuse_caches[i], dfused[i])
        if i:
            dfused[i - 1] += df_prev
            g_merge[i - 1] = g

    g_rgb_blocks, g_cbam_rgb = _stream_bwd(net.rgb_blocks, rgb_caches, dm_rgb)
    g_t_blocks, g_cbam_t = _stream_bwd(net.t_blocks, t_caches, dm_t)
    return AdfNetToy(
        config=net.config,
        rgb_blocks=g_rgb_blocks,
        t_blocks=g_t_blocks,
        cbam_rgb=g_cbam_rgb,
        cbam_t=g_cbam_t,
        merge_convs=tuple(g_merge),
        ppm=g_ppm,
        laterals=tuple(g_lat),
        fams=tuple(g_fam),
        head=g_head,
    )


def adfnet_forward(net: AdfNetToy, rgb, t) -> np.ndarray:
    """Saliency probabilities of shape (n, 1, H, W), every value in (0, 1)."""
    return _forward(net, rgb, t)[0]


def _check_gt(gt, shape) -> np.ndarray:
    gt = T.as_tensor(gt)
    if gt.shape != shape:
        raise ShapeError(f"ground truth {gt.shape} does not match prediction {shape}")
    if not np.all((gt == 0.0) | (gt == 1.0)):
        raise ContractError("ground truth must be binary (0/1)")
    return gt


def loss_and_grad(net: AdfNetToy, rgb, t, gt, edge_floor: float = losses.EPS) -> tuple[losses.LossValue, AdfNetToy]:
    """Total loss and its gradient for every parameter (``edge_floor`` as in ``losses.total_loss_grad``)."""
    pred, cache = _forward(net, rgb, t)
    gt = _check_gt(gt, pred.shape)
    value, dpred = losses.total_loss_grad(pred, gt, edge_floor)
    return value, _backward(cache, dpred)


def train_step(
    net: AdfNetToy, rgb, t, gt, lr: float, edge_floor: float = TRAIN_EDGE_FLOOR
) -> tuple[AdfNetToy, losses.LossValue]:
    """One plain gradient-descent step on the total loss; returns a new network.

    The edge-term gradient is capped through ``edge_floor`` (see
    ``losses``); without the cap a single boundary pixel whose predicted
    Laplacian passes through zero produces a step large enough to
    destroy the network.
    """
    if not lr >= 0:
        raise ContractError(f"learning rate must be non-negative, got {lr}")
    value, grads = loss_and_grad(net, rgb, t, gt, edge_floor)
    if lr == 0:
        return net, value
    return tree_map(lambda w, g: w - lr * g, net, grads), value
