"""Saliency losses: pixel cross-entropy plus a Laplacian edge term.

Both terms are negative log-likelihoods averaged over pixels (batch
included) with predictions clamped to ``[EPS, 1 - EPS]`` inside the logs.
For the pixel term the backward pass treats the clamp as the identity:
the log derivatives use the unclamped prediction. Chained through the
network's output sigmoid this gives the familiar ``p - t`` logit
gradient, so a saturated prediction keeps a restoring gradient instead
of landing in a zero-gradient dead zone. The edge term has no sigmoid to
cancel ``1/p`` (its input is a near-zero boundary map), so there the
gradient is the exact derivative of the clamped expression: zero where
the clamp is active. Away from the clamp edges both are the exact
derivative of the reported loss.

The edge term is singular where the prediction's Laplacian crosses zero
on a ground-truth boundary pixel: ``d/dp log p`` reaches ``1/EPS``
there. ``total_loss_grad`` takes an ``edge_floor`` for training; it
floors that denominator at the given value, which caps the per-pixel
edge gradient at ``1/edge_floor``. The default ``EPS`` is the exact
derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .tensor import ConvParams

EPS = 1e-7
_TINY = np.finfo(np.float64).tiny

LAPLACE_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class LossValue:
    total: float
    ce: float
    edge: float


def _laplace_params() -> ConvParams:
    # read at call time so a patched module constant takes effect
    return ConvParams.same(np.asarray(LAPLACE_KERNEL, dtype=np.float64).reshape(1, 1, 3, 3), np.zeros(1))


def _check_pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    pred = T.as_tensor(pred)
    gt = T.as_tensor(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    if not np.all((gt == 0.0) | (gt == 1.0)):
        raise ContractError("ground truth must be binary (0/1)")
    return pred, gt


def _soft_bce(
    p: np.ndarray, target: np.ndarray, pass_through: bool, floor: float = EPS
) -> tuple[float, np.ndarray]:
    """Mean of ``-[t log p + (1-t) log(1-p)]`` with clamped ``p``, and its gradient in ``p``.

    ``pass_through`` selects the identity-clamp gradient described above;
    otherwise ``floor`` bounds the ``1/p`` denominator from below.
    """
    pc = np.clip(p, EPS, 1.0 - EPS)
    n = p.size
    loss = -float(np.sum(target * np.log(pc) + (1.0 - target) * np.log(1.0 - pc))) / n
    if pass_through:
        lo = np.maximum(p, _TINY)
        hi = np.maximum(1.0 - p, _TINY)
        grad = (-(target / lo) + (1.0 - target) / hi) / n
    else:
        inside = (p >= EPS) & (p <= 1.0 - EPS)
        grad = (-(target / np.maximum(pc, floor)) + (1.0 - target) / (1.0 - pc)) * inside / n
    return max(loss, 0.0), grad


def cross_entropy(pred, gt) -> float:
    pred, gt = _check_pair(pred, gt)
    return _soft_bce(pred, gt, True)[0]


def cross_entropy_grad(pred, gt) -> np.ndarray:
    pred, gt = _check_pair(pred, gt)
    return _soft_bce(pred, gt, True)[1]


def _laplacian_fwd(x):
    x = T.as_tensor(x)
    if x.shape[1] != 1:
        raise ShapeError(f"laplacian_boundary expects one channel, got {x.shape[1]}")
    p = _laplace_params()
    lap = T.conv2d(x, p)
    return np.abs(np.tanh(lap)), (x, p, lap)


def _laplacian_bwd(cache, dy):
    x, p, lap = cache
    t = np.tanh(lap)
    dlap = dy * np.sign(t) * (1.0 - t * t)
    return T.conv2d_grad(x, p, dlap)[0]


def laplacian_boundary(x) -> np.ndarray:
    """``|tanh(laplace * x)|`` with the 5-point kernel and zero padding; values in [0, 1)."""
    return _laplacian_fwd(x)[0]


def laplacian_boundary_grad(x, dy) -> np.ndarray:
    _, cache = _laplacian_fwd(x)
    return _laplacian_bwd(cache, T.as_tensor(dy))


def _edge(pred, gt, floor: float = EPS) -> tuple[float, np.ndarray]:
    bp, cache = _laplacian_fwd(pred)
    bg = laplacian_boundary(gt)
    loss, dbp = _soft_bce(bp, bg, False, floor)
    return loss, _laplacian_bwd(cache, dbp)


def edge_loss(pred, gt) -> float:
    """Cross-entropy of the prediction's boundary map against the ground truth's."""
    pred, gt = _check_pair(pred, gt)
    return _edge(pred, gt)[0]


def total_loss(pred, gt) -> LossValue:
    pred, gt = _check_pair(pred, gt)
    ce = _soft_bce(pred, gt, True)[0]
    edge = _edge(pred, gt)[0]
    return LossValue(ce + edge, ce, edge)


def total_loss_grad(pred, gt, edge_floor: float = EPS) -> tuple[LossValue, np.ndarray]:
    """Loss components and the gradient of ``total`` with respect to ``pred``.

    ``edge_floor`` above ``EPS`` selects the capped edge gradient described
    in the module docstring; the reported loss value is unaffected.
    """
    if not EPS <= edge_floor < 1.0:
        raise ContractError(f"edge_floor must lie in [{EPS}, 1), got {edge_floor}")
    pred, gt = _check_pair(pred, gt)
    ce, dce = _soft_bce(pred, gt, True)
    edge, dedge = _edge(pred, gt, edge_floor)
    return LossValue(ce + edge, ce, edge), dce + dedge
