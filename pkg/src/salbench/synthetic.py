"""Synthetic hot-square RGBT corpus.

Each sample holds one axis-aligned square object. In RGB the object is
painted almost in the background colour; in thermal it is hot against a
cold background. Both modalities get uniform pixel noise. All draws come
from PCG32, so a seed fixes the corpus on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Pcg32

TRAIN_STREAM = 1
TEST_STREAM = 2


@dataclass(frozen=True)
class HotSquareTask:
    size: int = 64
    train_count: int = 200
    test_count: int = 50
    min_side: int = 10
    max_side: int = 28
    rgb_contrast: float = 0.06  # max per-channel colour offset of the object
    rgb_noise: float = 0.08
    thermal_noise: float = 0.08


@dataclass
class Corpus:
    rgb: np.ndarray  # (n, 3, H, W) in [0, 1]
    thermal: np.ndarray  # (n, 1, H, W) in [0, 1]
    gt: np.ndarray  # (n, 1, H, W) in {0, 1}

    def __len__(self) -> int:
        return self.rgb.shape[0]

    def batch(self, idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx = np.asarray(idx)
        return self.rgb[idx], self.thermal[idx], self.gt[idx]


def _sample(task: HotSquareTask, rng: Pcg32):
    s = task.size
    side = rng.integers(task.min_side, task.max_side + 1)
    top = rng.integers(0, s - side + 1)
    left = rng.integers(0, s - side + 1)
    gt = np.zeros((s, s))
    gt[top : top + side, left : left + side] = 1.0

    bg = rng.uniform(0.25, 0.75, 3)
    offset = rng.uniform(-task.rgb_contrast, task.rgb_contrast, 3)
    rgb = bg[:, None, None] + offset[:, None, None] * gt[None]
    rgb = rgb + rng.uniform(-task.rgb_noise, task.rgb_noise, (3, s, s))

    cold = rng.uniform(0.1, 0.35, 1)[0]
    hot = rng.uniform(0.65, 0.9, 1)[0]
    thermal = cold + (hot - cold) * gt
    thermal = thermal + rng.uniform(-task.thermal_noise, task.thermal_noise, (s, s))
    return np.clip(rgb, 0.0, 1.0), np.clip(thermal, 0.0, 1.0)[None], gt[None]


def make_corpus(task: HotSquareTask, seed: int, split: str) -> Corpus:
    count, stream = (task.train_count, TRAIN_STREAM) if split == "train" else (task.test_count, TEST_STREAM)
    rng = Pcg32(seed, stream)
    samples = [_sample(task, rng) for _ in range(count)]
    s = task.size
    if not samples:
        return Corpus(np.zeros((0, 3, s, s)), np.zeros((0, 1, s, s)), np.zeros((0, 1, s, s)))
    rgb, thermal, gt = (np.stack(parts) for parts in zip(*samples))
    return Corpus(rgb, thermal, gt)
