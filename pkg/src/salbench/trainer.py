"""Toy training run on the synthetic hot-square corpus.

Mini-batches are drawn without replacement from a fresh PCG32
permutation each epoch (stream ``ORDER_STREAM``), and the learning rate
decays linearly from ``lr`` to ``lr * lr_final_fraction`` over the run.
Every step is plain gradient descent through ``network.train_step``.
The initial and final losses are measured on the whole training corpus
with the same network, so their ratio does not depend on batch luck.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import losses, metrics
from . import network as N
from .errors import ConfigError, NumericalError
from .rng import Pcg32
from .synthetic import Corpus, HotSquareTask, make_corpus

ORDER_STREAM = 3
EVAL_BATCH = 25


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 300
    lr: float = 0.025
    lr_final_fraction: float = 0.1
    batch_size: int = 8
    seed: int = 0
    task: HotSquareTask = field(default_factory=HotSquareTask)
    net: N.NetConfig = field(default_factory=N.NetConfig)

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError(f"steps must be non-negative, got {self.steps}")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ConfigError(f"lr must be finite and non-negative, got {self.lr}")
        if not 0.0 <= self.lr_final_fraction <= 1.0:
            raise ConfigError(f"lr_final_fraction must lie in [0, 1], got {self.lr_final_fraction}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.task.size % N.INPUT_MULTIPLE:
            raise ConfigError(f"image size must be a multiple of {N.INPUT_MULTIPLE}, got {self.task.size}")
        if self.task.train_count < 1 or self.task.test_count < 1:
            raise ConfigError("the synthetic task needs at least one train and one test sample")
        if not 1 <= self.task.min_side <= self.task.max_side <= self.task.size:
            raise ConfigError(f"object sides must satisfy 1 <= min <= max <= size, got {self.task.min_side}..{self.task.max_side}")

    def lr_at(self, step: int) -> float:
        if self.steps == 0:
            return self.lr
        return self.lr * (1.0 - (1.0 - self.lr_final_fraction) * step / self.steps)


@dataclass(frozen=True)
class LogRow:
    step: int
    lr: float
    value: losses.LossValue


@dataclass
class TrainResult:
    net: N.AdfNetToy
    log: list[LogRow]
    initial_loss: float
    final_loss: float
    curve: metrics.PrCurve
    max_f: float
    mean_mae: float

    def log_csv(self) -> str:
        return loss_log_csv(self.log)

    def summary(self) -> dict:
        return {
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "loss_ratio": self.final_loss / self.initial_loss if self.initial_loss > 0 else None,
            "test_max_f": self.max_f,
            "test_mean_mae": self.mean_mae,
            "steps": len(self.log),
        }


def loss_log_csv(rows: list[LogRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "lr", "total", "ce", "edge"])
    for r in rows:
        w.writerow([r.step, repr(r.lr), repr(r.value.total), repr(r.value.ce), repr(r.value.edge)])
    return buf.getvalue()


def batch_order(count: int, batch_size: int, steps: int, seed: int) -> list[np.ndarray]:
    """Index batches for every step; each epoch is a seeded permutation, consumed in order."""
    rng = Pcg32(seed, ORDER_STREAM)
    pending: list[int] = []
    out = []
    for _ in range(steps):
        while len(pending) < batch_size:
            pending.extend(np.argsort(rng.random(count), kind="stable").tolist())
        out.append(np.asarray(pending[:batch_size]))
        del pending[:batch_size]
    return out


def predict(net: N.AdfNetToy, corpus: Corpus, batch: int = EVAL_BATCH) -> np.ndarray:
    parts = [N.adfnet_forward(net, corpus.rgb[i : i + batch], corpus.thermal[i : i + batch]) for i in range(0, len(corpus), batch)]
    return np.concatenate(parts)


def corpus_loss(net: N.AdfNetToy, corpus: Corpus, batch: int = EVAL_BATCH) -> float:
    """Total loss over the corpus, weighted by batch size (equals the single-batch value)."""
    total = 0.0
    for i in range(0, len(corpus), batch):
        sl = slice(i, i + batch)
        pred = N.adfnet_forward(net, corpus.rgb[sl], corpus.thermal[sl])
        total += losses.total_loss(pred, corpus.gt[sl]).total * pred.shape[0]
    return total / len(corpus)


def evaluate(net: N.AdfNetToy, corpus: Corpus) -> tuple[metrics.PrCurve, float, float]:
    pred = predict(net, corpus)
    pairs = [(metrics.quantize(pred[i, 0]), corpus.gt[i, 0].astype(np.uint8)) for i in range(len(corpus))]
    return metrics.dataset_curve(metrics.evaluate_maps(pairs))


def train_toy(cfg: TrainConfig, on_step: Callable[[LogRow], None] | None = None) -> TrainResult:
    """Runs the whole toy experiment; raises ``NumericalError`` if the loss stops being finite."""
    train = make_corpus(cfg.task, cfg.seed, "train")
    test = make_corpus(cfg.task, cfg.seed, "test")
    net = N.adfnet_init(cfg.net, cfg.seed)
    initial = corpus_loss(net, train)
    log: list[LogRow] = []
    for step, idx in enumerate(batch_order(len(train), cfg.batch_size, cfg.steps, cfg.seed)):
        lr = cfg.lr_at(step)
        net, value = N.train_step(net, *train.batch(idx), lr)
        row = LogRow(step, lr, value)
        log.append(row)
        if on_step is not None:
            on_step(row)
        if not math.isfinite(value.total):
            raise NumericalError(f"loss became {value.total} at step {step}")
    final = corpus_loss(net, train)
    if not math.isfinite(final):
        raise NumericalError(f"final training loss is {final}")
    curve, max_f, mae = evaluate(net, test)
    return TrainResult(net, log, initial, final, curve, max_f, mae)
