"""Self-check: kernels against brute-force references, gradients against
central differences, metrics against per-threshold passes.

Each suite runs a number of seeded instances and reports the worst error
it saw. Kernel errors are normwise relative, ``max|a - b| / max|b|``;
gradient errors are those of ``tensor.grad_check``. A suite fails when
its worst error reaches its tolerance, and the report then lists the
failing case identifiers (``<suite>#<instance>``).
"""

from __future__ import annotations

import contextlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from . import benchmark, losses, metrics, reference
from . import fusion as Fu
from . import tensor as T
from .fusion import CbamParams, FamParams, PpmParams
from .network import named_arrays, tree_map
from .tensor import ConvParams

ORACLE_TOL = 1e-12
GRAD_TOL = 1e-5
GRAD_H = 1e-5
SPOT_TOL = 1e-6


@dataclass
class SuiteResult:
    name: str
    kind: str
    cases: int
    max_error: float
    tolerance: float
    failures: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "cases": self.cases,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "failures": self.failures,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class Report:
    suites: list[SuiteResult]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    @property
    def failing_cases(self) -> list[str]:
        return [c for s in self.suites for c in s.failures]

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "suites": [s.to_json() for s in self.suites]}, indent=2) + "\n"


def rel_err(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return math.inf
    diff = float(np.max(np.abs(a - b))) if a.size else 0.0
    if diff == 0.0:
        return 0.0
    scale = float(np.max(np.abs(b)))
    return diff / scale if scale > 0 else math.inf


# -- random instances ------------------------------------------------------------------------


def _rand(rng: np.random.Generator, shape, integer: bool = False) -> np.ndarray:
    if integer:
        return rng.integers(-4, 5, size=shape).astype(np.float64)
    return rng.uniform(-1.0, 1.0, size=shape)


def _rand_conv(rng, out_c, in_c, k, stride=1, pad=None, scale=0.5) -> ConvParams:
    pad = (k - 1) // 2 if pad is None else pad
    return ConvParams(rng.uniform(-scale, scale, (out_c, in_c, k, k)), rng.uniform(-0.2, 0.2, out_c), stride, pad)


def _rand_cbam(rng, c, r, k) -> CbamParams:
    return CbamParams(_rand_conv(rng, c // r, c, 1), _rand_conv(rng, c, c // r, 1), _rand_conv(rng, 1, 2, k))


def _distinct(rng, shape, gap: float = 1e-3) -> np.ndarray:
    """Random values whose pairwise gaps and distance from zero exceed ``gap`` (no kinks within h)."""
    size = int(np.prod(shape))
    vals = np.sort(rng.uniform(0.0, 1.0, size)) + gap * np.arange(size)
    vals = vals / vals[-1] * 2.0 - 1.0
    vals = vals[np.abs(vals) > gap] if size > 1 else vals
    while vals.size < size:  # replace values dropped for being near zero
        vals = np.append(vals, 1.0 + gap * (vals.size + 1))
    return rng.permutation(vals)[:size].reshape(shape)


# -- kernel oracles ----------------------------------------------------------------------------


def _oracle_suite(name: str, count: int, seed: int, case: Callable[[np.random.Generator, int], tuple]) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult(name, "oracle", count, 0.0, ORACLE_TOL)
    for i in range(count):
        got, want, exact = case(rng, i)
        err = rel_err(got, want)
        res.max_error = max(res.max_error, err)
        bad = (not np.array_equal(got, want)) if exact else not err < ORACLE_TOL
        if bad:
            res.failures.append(f"{name}#{i}")
    return res


def _dims(rng) -> tuple[int, int]:
    return int(rng.integers(1, 4)), int(rng.integers(1, 4))


def _case_conv(rng, i):
    n, c = _dims(rng)
    h, w = (int(v) for v in rng.integers(3, 9, 2))
    k = int(rng.choice([1, 3]))
    stride, pad = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    integer = i % 2 == 1
    x = _rand(rng, (n, c, h, w), integer)
    oc = int(rng.integers(1, 4))
    p = ConvParams(_rand(rng, (oc, c, k, k), integer), _rand(rng, (oc,), integer), stride, pad)
    return T.conv2d(x, p), reference.conv2d(x, p.weight, p.bias, stride, pad), integer


def _case_avgpool(rng, i):
    n, c = _dims(rng)
    rate = int(rng.choice([1, 2, 4]))
    h, w = rate * int(rng.integers(1, 8 // rate + 1)), rate * int(rng.integers(1, 8 // rate + 1))
    x = _rand(rng, (n, c, h, w), i % 2 == 1)
    return T.avgpool(x, rate), reference.avgpool(x, rate), False


def _case_adaptive(rng, i):
    n, c = _dims(rng)
    h, w = (int(v) for v in rng.integers(1, 9, 2))
    oh, ow = int(rng.integers(1, h + 1)), int(rng.integers(1, w + 1))
    x = _rand(rng, (n, c, h, w), i % 2 == 1)
    return T.adaptive_avgpool(x, oh, ow), reference.adaptive_avgpool(x, oh, ow), False


def _case_maxpool(rng, i):
    n, c = _dims(rng)
    h, w = 2 * int(rng.integers(1, 5)), 2 * int(rng.integers(1, 5))
    x = _rand(rng, (n, c, h, w), i % 2 == 1)
    return T.maxpool2(x)[0], reference.maxpool2(x), True


def _case_upsample(rng, i):
    n, c = _dims(rng)
    h, w = (int(v) for v in rng.integers(1, 9, 2))
    oh, ow = int(rng.integers(h, 9)), int(rng.integers(w, 9))
    x = _rand(rng, (n, c, h, w), i % 2 == 1)
    return T.upsample_bilinear(x, oh, ow), reference.upsample_bilinear(x, oh, ow), False


ORACLES = {
    "conv2d": _case_conv,
    "avgpool": _case_avgpool,
    "adaptive_avgpool": _case_adaptive,
    "maxpool2": _case_maxpool,
    "upsample_bilinear": _case_upsample,
}


# -- gradient suites ---------------------------------------------------------------------------


def _flatten(tree) -> list[np.ndarray]:
    return [a for _, a in named_arrays(tree)]


def _rebuild(tree, arrays):
    it = iter(arrays)
    return tree_map(lambda _: next(it), tree)


def _vjp_check(x_list, params, forward, backward) -> float:
    """grad_check of ``sum(dy * forward(xs, params))`` over every input and parameter array.

    ``forward(xs, params) -> (y, cache)``; ``backward(cache, dy) -> (dxs, dparams)``.
    """
    n_x = len(x_list)
    flat_p = _flatten(params) if params is not None else []
    y0, _ = forward([np.array(x) for x in x_list], params)
    dy = np.random.default_rng(len(flat_p) + y0.size).uniform(-1.0, 1.0, y0.shape)

    def split(arrs):
        xs = list(arrs[:n_x])
        p = _rebuild(params, arrs[n_x:]) if params is not None else None
        return xs, p

    def value(*arrs):
        xs, p = split(arrs)
        return float(np.sum(dy * forward(xs, p)[0]))

    def f(*arrs):
        xs, p = split(arrs)
        y, cache = forward(xs, p)
        dxs, dp = backward(cache, dy)
        grads = list(dxs) + (_flatten(dp) if params is not None else [])
        return float(np.sum(dy * y)), grads

    return T.grad_check(f, list(x_list) + flat_p, GRAD_H, value_fn=value)


def _conv_grad_case(x, p):
    def fwd(xs, q):
        return T.conv2d(xs[0], q), (xs[0], q)

    def bwd(cache, dy):
        xx, q = cache
        dx, dw, db = T.conv2d_grad(xx, q, dy)
        return (dx,), q.replace(dw, db)

    return _vjp_check([x], p, fwd, bwd)


def _g_simple(fwd_fn, bwd_fn, shape_fn):
    def case(rng):
        x = _distinct(rng, shape_fn(rng))

        def fwd(xs, _):
            return fwd_fn(xs[0])

        def bwd(cache, dy):
            return (bwd_fn(cache, dy),), None

        return _vjp_check([x], None, fwd, bwd)

    return case


def _mp_fwd(x):
    y, am = T.maxpool2(x)
    return y, (am, x.shape)


def _gmp_fwd(x):
    y, idx = T.global_maxpool(x)
    return y, (idx, x.shape)


def _cmax_fwd(x):
    y, idx = T.channel_max(x)
    return y, (idx, x.shape[1])


def _ups_case(rng):
    x = _rand(rng, (1, 2, 3, 4))
    oh, ow = int(rng.integers(3, 8)), int(rng.integers(4, 9))
    return _vjp_check(
        [x], None, lambda xs, _: (T.upsample_bilinear(xs[0], oh, ow), None), lambda c, dy: ((T.upsample_bilinear_grad(dy, 3, 4),), None)
    )


def _act_case(rng):
    kind = T.ACTIVATIONS[int(rng.integers(0, len(T.ACTIVATIONS)))]
    x = _distinct(rng, (1, 2, 3, 3)) * 3.0
    return _vjp_check(
        [x], None, lambda xs, _: (T.activation(xs[0], kind), xs[0]), lambda c, dy: ((T.activation_grad(c, dy, kind),), None)
    )


def _eltwise_case(rng):
    op = ["add", "mul"][int(rng.integers(0, 2))]
    a = _rand(rng, (2, 3, 3, 2))
    bshape = [(2, 3, 3, 2), (2, 3, 1, 1), (2, 1, 3, 2)][int(rng.integers(0, 3))]
    b = _rand(rng, bshape)
    return _vjp_check(
        [a, b], None, lambda xs, _: (T.eltwise(xs[0], xs[1], op), xs), lambda c, dy: (T.eltwise_grad(c[0], c[1], dy, op), None)
    )


def _concat_case(rng):
    chans = [int(v) for v in rng.integers(1, 4, int(rng.integers(1, 4)))]
    parts = [_rand(rng, (1, c, 2, 3)) for c in chans]
    return _vjp_check(parts, None, lambda xs, _: (T.concat_channels(xs), None), lambda c, dy: (T.concat_channels_grad(dy, chans), None))


def _attn_case(fwd, bwd):
    def case(rng):
        c, r = [(4, 2), (4, 4), (6, 3)][int(rng.integers(0, 3))]
        k = int(rng.choice([3, 5]))
        x = _rand(rng, (int(rng.integers(1, 3)), c, 4, 5))
        p = _rand_cbam(rng, c, r, k)
        return _vjp_check([x], p, lambda xs, q: fwd(xs[0], q), lambda cache, dy: ((lambda d: ((d[0],), d[1]))(bwd(cache, dy))))

    return case


def _fuse_case(rng):
    i = int(rng.integers(1, 6))
    c = 3
    m_rgb, m_t = _rand(rng, (1, c, 4, 4)), _rand(rng, (1, c, 4, 4))
    if i == 1:
        return _vjp_check(
            [m_rgb, m_t], None,
            lambda xs, _: Fu.fuse_stage_fwd(1, None, xs[0], xs[1], None),
            lambda cache, dy: (Fu.fuse_stage_bwd(cache, dy)[1:3], None),
        )
    side = 4 if i == 5 and rng.integers(0, 2) else 8
    f_prev = _distinct(rng, (1, 2, side, side))
    merge = _rand_conv(rng, c, 2, 3)

    def bwd(cache, dy):
        df, dr, dt, dm = Fu.fuse_stage_bwd(cache, dy)
        return (df, dr, dt), dm

    return _vjp_check([f_prev, m_rgb, m_t], merge, lambda xs, q: Fu.fuse_stage_fwd(i, xs[0], xs[1], xs[2], q), bwd)


def _ppm_case(rng):
    c = 4
    size = int(rng.integers(5, 7))
    x = _rand(rng, (1, c, size, size))
    p = PpmParams(tuple(_rand_conv(rng, c // 4, c, 1) for _ in range(4)), _rand_conv(rng, 3, c, 3))
    return _vjp_check([x], p, lambda xs, q: Fu.ppm_fwd(xs[0], q), lambda cache, dy: (lambda d: ((d[0],), d[1]))(Fu.ppm_bwd(cache, dy)))


def _fam_case(rng):
    c = 2
    x = _rand(rng, (1, c, 8, 8))
    p = FamParams(_rand_conv(rng, c, c, 3))
    return _vjp_check([x], p, lambda xs, q: Fu.fam_fwd(xs[0], q), lambda cache, dy: (lambda d: ((d[0],), d[1]))(Fu.fam_bwd(cache, dy)))


def _loss_inputs(rng, shape=(1, 1, 6, 6)):
    pred = rng.uniform(0.05, 0.95, shape)
    gt = (rng.uniform(size=shape) < 0.5).astype(np.float64)
    return pred, gt


def _ce_case(rng):
    pred, gt = _loss_inputs(rng)
    return T.grad_check(lambda p: (losses.cross_entropy(p, gt), [losses.cross_entropy_grad(p, gt)]), [pred], GRAD_H)


def _lap_case(rng):
    x = rng.uniform(0.0, 1.0, (1, 1, 5, 6))
    dy = rng.uniform(-1.0, 1.0, x.shape)
    return T.grad_check(
        lambda v: (float(np.sum(dy * losses.laplacian_boundary(v))), [losses.laplacian_boundary_grad(v, dy)]),
        [x], GRAD_H,
    )


def _edge_inputs(rng, min_lap: float = 0.05):
    """Loss inputs whose Laplacian stays clear of zero, where ``-log|tanh|`` blows up.

    Near zero the central difference carries a truncation error of order
    ``h^2 / lap^3``, which says nothing about the analytic gradient.
    """
    while True:
        pred, gt = _loss_inputs(rng)
        if np.min(np.abs(T.conv2d(pred, losses._laplace_params()))) >= min_lap:
            return pred, gt


def _edge_case(rng):
    pred, gt = _edge_inputs(rng)
    return T.grad_check(lambda p: (lambda v: (v[0], [v[1]]))(losses._edge(p, gt)), [pred], GRAD_H)


def _total_case(rng):
    pred, gt = _edge_inputs(rng)

    def f(p):
        v, g = losses.total_loss_grad(p, gt)
        return v.total, [g]

    return T.grad_check(f, [pred], GRAD_H, value_fn=lambda p: losses.total_loss(p, gt).total)


GRADIENTS: dict[str, Callable[[np.random.Generator], float]] = {
    "conv2d": lambda rng: _conv_grad_case(
        _rand(rng, (2, 2, 5, 4)), _rand_conv(rng, 3, 2, 3, *[(1, 0), (1, 1), (2, 1)][int(rng.integers(0, 3))])
    ),
    "maxpool2": _g_simple(_mp_fwd, lambda c, dy: T.maxpool2_grad(dy, *c), lambda rng: (1, 2, 4, 6)),
    "avgpool": _g_simple(
        lambda x: (T.avgpool(x, 2), None), lambda c, dy: T.avgpool_grad(dy, 2), lambda rng: (1, 2, 4, 6)
    ),
    "adaptive_avgpool": _g_simple(
        lambda x: (T.adaptive_avgpool(x, 3, 2), x.shape), lambda c, dy: T.adaptive_avgpool_grad(dy, c), lambda rng: (1, 2, 5, 5)
    ),
    "global_maxpool": _g_simple(_gmp_fwd, lambda c, dy: T.global_maxpool_grad(dy, *c), lambda rng: (2, 2, 3, 3)),
    "channel_mean": _g_simple(
        lambda x: (T.channel_mean(x), x.shape[1]), lambda c, dy: T.channel_mean_grad(dy, c), lambda rng: (1, 3, 3, 3)
    ),
    "channel_max": _g_simple(_cmax_fwd, lambda c, dy: T.channel_max_grad(dy, *c), lambda rng: (1, 3, 3, 3)),
    "upsample_bilinear": _ups_case,
    "activation": _act_case,
    "eltwise": _eltwise_case,
    "concat_channels": _concat_case,
    "channel_attention": _attn_case(Fu.channel_attention_fwd, Fu.channel_attention_bwd),
    "spatial_attention": _attn_case(Fu.spatial_attention_fwd, Fu.spatial_attention_bwd),
    "cbam": _attn_case(Fu.cbam_fwd, Fu.cbam_bwd),
    "fuse_stage": _fuse_case,
    "ppm_forward": _ppm_case,
    "fam_forward": _fam_case,
    "cross_entropy": _ce_case,
    "laplacian_boundary": _lap_case,
    "edge_loss": _edge_case,
    "total_loss": _total_case,
}


def _grad_suite(name: str, count: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult(f"grad:{name}", "gradient", count, 0.0, GRAD_TOL)
    for i in range(count):
        err = GRADIENTS[name](rng)
        res.max_error = max(res.max_error, err)
        if not err < GRAD_TOL:
            res.failures.append(f"grad:{name}#{i}")
    return res


# -- spot checks and metric equivalence ------------------------------------------------------------


def _laplacian_suite(count: int, seed: int) -> SuiteResult:
    """Closed-form values plus the stencil reference on random images."""
    res = SuiteResult("laplacian_boundary", "spot", count + 2, 0.0, SPOT_TOL)
    flat = losses.laplacian_boundary(np.full((1, 1, 6, 6), 0.37))
    # interior of a constant image; the zero-padded border is not constant
    res.max_error = float(np.max(flat[0, 0, 1:-1, 1:-1]))
    if not res.max_error < SPOT_TOL:
        res.failures.append("laplacian_boundary#constant")
    imp = np.zeros((1, 1, 5, 5))
    imp[0, 0, 2, 2] = 1.0
    err = abs(float(losses.laplacian_boundary(imp)[0, 0, 2, 2]) - abs(math.tanh(-4.0)))
    res.max_error = max(res.max_error, err)
    if not err < SPOT_TOL:
        res.failures.append("laplacian_boundary#impulse")
    rng = np.random.default_rng(seed)
    for i in range(count):
        img = rng.uniform(0.0, 1.0, (int(rng.integers(1, 8)), int(rng.integers(1, 8))))
        err = rel_err(losses.laplacian_boundary(img[None, None])[0, 0], reference.laplacian_boundary(img))
        res.max_error = max(res.max_error, err)
        if not err < ORACLE_TOL:
            res.failures.append(f"laplacian_boundary#{i}")
    return res


def _cross_entropy_suite(count: int, seed: int) -> SuiteResult:
    res = SuiteResult("cross_entropy", "spot", count + 1, 0.0, 1e-9)
    err = abs(losses.cross_entropy(np.full((1, 1, 4, 4), 0.5), np.ones((1, 1, 4, 4))) - math.log(2.0))
    res.max_error = err
    if not err < 1e-9:
        res.failures.append("cross_entropy#ln2")
    rng = np.random.default_rng(seed)
    for i in range(count):
        pred, gt = _loss_inputs(rng, (1, 1, 4, 5))
        err = abs(losses.cross_entropy(pred, gt) - reference.bce(pred, gt)) / max(1.0, reference.bce(pred, gt))
        res.max_error = max(res.max_error, err)
        if not err < 1e-12:
            res.failures.append(f"cross_entropy#{i}")
    return res


def _f_measure_suite() -> SuiteResult:
    res = SuiteResult("f_measure", "spot", 3, 0.0, 1e-4)
    cases = {"p1r1": (1.0, 1.0, 1.0), "r0": (0.7, 0.0, 0.0), "p08r05": (0.8, 0.5, 1.3 * 0.4 / (0.24 + 0.5))}
    for name, (p, r, want) in cases.items():
        err = abs(metrics.f_measure(p, r) - want)
        res.max_error = max(res.max_error, err)
        if not err < 1e-4:
            res.failures.append(f"f_measure#{name}")
    return res


def _eval_image_suite(count: int, seed: int, side: int = 32) -> SuiteResult:
    res = SuiteResult("eval_image", "metric", count, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    for i in range(count):
        sal = rng.integers(0, 256, (side, side)).astype(np.uint8)
        gt = (rng.uniform(size=(side, side)) < rng.uniform(0.0, 1.0)).astype(np.uint8)
        acc = metrics.eval_image(sal, gt)
        tp, fp, fn = reference.threshold_counts(sal, gt)
        mae = int(np.sum(np.abs(sal.astype(np.int64) - 255 * gt.astype(np.int64))))
        ok = np.array_equal(acc.tp, tp) and np.array_equal(acc.fp, fp) and np.array_equal(acc.fn, fn) and acc.abs_err == mae
        if not ok:
            res.max_error = 1.0
            res.failures.append(f"eval_image#{i}")
    return res


def _permutation_suite(count: int, seed: int) -> SuiteResult:
    res = SuiteResult("dataset_curve_permutation", "metric", count, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    accs = [
        metrics.eval_image(rng.integers(0, 256, (16, 16)).astype(np.uint8), (rng.uniform(size=(16, 16)) < 0.3).astype(np.uint8))
        for _ in range(12)
    ]
    base = metrics.dataset_curve(accs)[0].to_csv()
    for i in range(count):
        perm = [accs[j] for j in rng.permutation(len(accs))]
        if metrics.dataset_curve(perm)[0].to_csv() != base:
            res.max_error = 1.0
            res.failures.append(f"dataset_curve_permutation#{i}")
    return res


def _cooccurrence_suite(count: int, seed: int) -> SuiteResult:
    res = SuiteResult("cooccurrence", "metric", count, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    for i in range(count):
        entries = tuple(
            benchmark.Entry(f"e{j}", "", "", "", "test", frozenset(t for t in benchmark.TAGS if rng.uniform() < 0.3))
            for j in range(int(rng.integers(0, 40)))
        )
        idx = benchmark.DatasetIndex(entries)
        m = benchmark.cooccurrence(idx)
        want = reference.cooccurrence([e.tags for e in entries], benchmark.TAGS)
        if not (np.array_equal(m, want) and np.array_equal(m, m.T)):
            res.max_error = 1.0
            res.failures.append(f"cooccurrence#{i}")
    return res


def _attention_suite(count: int, seed: int) -> SuiteResult:
    """Gates never enlarge |x|; the channel gate is constant per plane, the spatial gate per pixel column."""
    res = SuiteResult("attention_invariants", "property", count, 0.0, ORACLE_TOL)
    rng = np.random.default_rng(seed)
    for i in range(count):
        c, r = [(4, 2), (4, 4), (8, 2)][int(rng.integers(0, 3))]
        x = rng.uniform(-3.0, 3.0, (1, c, int(rng.integers(2, 6)), int(rng.integers(2, 6))))
        p = _rand_cbam(rng, c, r, int(rng.choice([3, 5, 7])))
        ca = Fu.channel_attention(x, p)
        sa = Fu.spatial_attention(x, p)
        out = Fu.cbam(x, p)
        over = max(float(np.max(np.abs(out) - np.abs(x))), float(np.max(np.abs(ca) - np.abs(x))), float(np.max(np.abs(sa) - np.abs(x))))
        ratio_c = ca / x
        ratio_s = sa / x
        spread_c = float(np.max(ratio_c.max(axis=(2, 3)) - ratio_c.min(axis=(2, 3))))
        spread_s = float(np.max(ratio_s.max(axis=1) - ratio_s.min(axis=1)))
        err = max(spread_c, spread_s, over, 0.0)
        res.max_error = max(res.max_error, err)
        if over > 0.0 or not max(spread_c, spread_s) < ORACLE_TOL:
            res.failures.append(f"attention_invariants#{i}")
    return res


# -- driver ------------------------------------------------------------------------------------------


@contextlib.contextmanager
def corrupted_laplace_kernel() -> Iterator[None]:
    """Negative control: swaps the boundary kernel for a wrong one while active."""
    saved = losses.LAPLACE_KERNEL
    losses.LAPLACE_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -3.0, 1.0], [0.0, 1.0, 0.0]])
    try:
        yield
    finally:
        losses.LAPLACE_KERNEL = saved


def suite_names() -> list[str]:
    return (
        list(ORACLES)
        + [f"grad:{g}" for g in GRADIENTS]
        + ["laplacian_boundary", "cross_entropy", "f_measure", "eval_image", "dataset_curve_permutation", "cooccurrence", "attention_invariants"]
    )


def run(
    oracle_cases: int = 100,
    grad_cases: int = 50,
    metric_cases: int = 200,
    property_cases: int = 1000,
    seed: int = 0,
    progress: Callable[[SuiteResult], None] | None = None,
    only: Iterable[str] | None = None,
) -> Report:
    """Runs the suites in ``suite_names()`` order; ``only`` restricts the run to the named suites."""
    wanted = None if only is None else set(only)
    if wanted is not None and wanted - set(suite_names()):
        raise ValueError(f"unknown suites: {', '.join(sorted(wanted - set(suite_names())))}")
    jobs: list[tuple[str, Callable[[], SuiteResult]]] = []
    for k, (name, case) in enumerate(ORACLES.items()):
        jobs.append((name, lambda n=name, c=case, s=seed + k: _oracle_suite(n, oracle_cases, s, c)))
    for k, name in enumerate(GRADIENTS):
        jobs.append((f"grad:{name}", lambda n=name, s=seed + 100 + k: _grad_suite(n, grad_cases, s)))
    jobs += [
        ("laplacian_boundary", lambda: _laplacian_suite(oracle_cases, seed + 200)),
        ("cross_entropy", lambda: _cross_entropy_suite(oracle_cases, seed + 201)),
        ("f_measure", _f_measure_suite),
        ("eval_image", lambda: _eval_image_suite(metric_cases, seed + 202)),
        ("dataset_curve_permutation", lambda: _permutation_suite(20, seed + 203)),
        ("cooccurrence", lambda: _cooccurrence_suite(oracle_cases, seed + 204)),
        ("attention_invariants", lambda: _attention_suite(property_cases, seed + 205)),
    ]
    results = []
    for name, job in jobs:
        if wanted is not None and name not in wanted:
            continue
        t0 = time.perf_counter()
        r = job()
        r.seconds = time.perf_counter() - t0
        results.append(r)
        if progress is not None:
            progress(r)
    return Report(results)
