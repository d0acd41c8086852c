"""PR curve, F-measure and MAE over 8-bit saliency maps.

A map is binarized as ``sal >= t`` for every integer ``t`` in 0..255.
Per-image counts are integers and MAE is kept as the integer numerator
``sum |sal - 255 * gt|``, so merging accumulators is exact and
order-independent.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

from .errors import ContractError, ShapeError

BETA2 = 0.3
EPS = 1e-8
LEVELS = 256

_T = TypeVar("_T")
_R = TypeVar("_R")


@dataclass(frozen=True)
class EvalAccumulator:
    tp: np.ndarray  # (256,) int64
    fp: np.ndarray
    fn: np.ndarray
    abs_err: int  # sum of |sal - 255*gt| over pixels, in units of 1/255
    pixel_count: int
    image_count: int

    @property
    def mae_sum(self) -> float:
        return self.abs_err / 255.0

    def merge(self, other: "EvalAccumulator") -> "EvalAccumulator":
        return EvalAccumulator(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.abs_err + other.abs_err,
            self.pixel_count + other.pixel_count,
            self.image_count + other.image_count,
        )


@dataclass(frozen=True)
class PrCurve:
    threshold: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f_beta: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall", "f_beta"])
        for t, p, r, f in zip(self.threshold, self.precision, self.recall, self.f_beta):
            w.writerow([int(t), repr(float(p)), repr(float(r)), repr(float(f))])
        return buf.getvalue()


def binarize_gt(mask) -> np.ndarray:
    """8-bit mask to {0, 1}: values >= 128 are foreground."""
    return (np.asarray(mask) >= 128).astype(np.uint8)


def quantize(sal) -> np.ndarray:
    """Probabilities in [0, 1] to 8-bit levels, ``floor(255 * s + 0.5)``."""
    s = np.clip(np.asarray(sal, dtype=np.float64), 0.0, 1.0)
    return np.floor(255.0 * s + 0.5).astype(np.uint8)


def eval_image(sal, gt) -> EvalAccumulator:
    """Counts for all 256 thresholds from one histogram pass per class."""
    sal = np.asarray(sal)
    gt = np.asarray(gt)
    if sal.shape != gt.shape:
        raise ShapeError(f"saliency {sal.shape} and ground truth {gt.shape} differ")
    if sal.dtype != np.uint8:
        raise ContractError(f"saliency map must be uint8, got {sal.dtype}")
    pos = gt.astype(bool)
    hist_pos = np.bincount(sal[pos], minlength=LEVELS).astype(np.int64)
    hist_neg = np.bincount(sal[~pos], minlength=LEVELS).astype(np.int64)
    # suffix sums: count of values >= t
    tp = np.cumsum(hist_pos[::-1])[::-1]
    fp = np.cumsum(hist_neg[::-1])[::-1]
    fn = int(pos.sum()) - tp
    abs_err = int(np.abs(sal.astype(np.int64) - 255 * pos.astype(np.int64)).sum())
    return EvalAccumulator(tp, fp, fn, abs_err, int(sal.size), 1)


def f_measure(precision, recall):
    """Weighted harmonic mean with beta^2 = 0.3."""
    p = np.asarray(precision, dtype=np.float64)
    r = np.asarray(recall, dtype=np.float64)
    f = (1.0 + BETA2) * p * r / (BETA2 * p + r + EPS)
    return float(f) if f.ndim == 0 else f


def merge_all(accs: Sequence[EvalAccumulator]) -> EvalAccumulator:
    if not accs:
        raise ContractError("cannot merge an empty accumulator list")
    total = accs[0]
    for a in accs[1:]:
        total = total.merge(a)
    return total


def dataset_curve(accs: Sequence[EvalAccumulator]) -> tuple[PrCurve, float, float]:
    """Pooled counts -> per-threshold P/R/F, then ``(curve, max_f, mean_mae)``."""
    total = merge_all(list(accs))
    tp = total.tp.astype(np.float64)
    precision = tp / (tp + total.fp + EPS)
    recall = tp / (tp + total.fn + EPS)
    f = f_measure(precision, recall)
    curve = PrCurve(np.arange(LEVELS), precision, recall, f)
    mean_mae = total.abs_err / (255.0 * total.pixel_count)
    return curve, float(f.max()), float(mean_mae)


def summary_json(max_f: float, mean_mae: float, image_count: int) -> str:
    return json.dumps({"max_f": max_f, "mean_mae": mean_mae, "image_count": image_count}, indent=2) + "\n"


def worker_count() -> int:
    """Worker cap from ``SALBENCH_THREADS`` (default: logical cores)."""
    raw = os.environ.get("SALBENCH_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[_T], _R], items: Sequence[_T], workers: int | None = None) -> list[_R]:
    """``[fn(x) for x in items]`` computed on a thread pool; results keep item order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate_maps(pairs: Sequence[tuple[np.ndarray, np.ndarray]], workers: int | None = None) -> list[EvalAccumulator]:
    return ordered_map(lambda sg: eval_image(*sg), pairs, workers)
