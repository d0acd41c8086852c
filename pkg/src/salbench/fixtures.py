"""On-disk benchmark fixtures built from the synthetic hot-square task.

``write_fixture`` lays out a directory the CLI can consume directly::

    <dir>/index.csv
    <dir>/images/<id>_rgb.ppm, <id>_t.pgm, <id>_gt.pgm
    <dir>/saliency/<id>.pgm      (optional; perfect or perturbed maps)

Tags are drawn per entry from PCG32 so co-occurrence statistics are
non-trivial yet reproducible.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from . import benchmark, netpbm
from .rng import Pcg32
from .synthetic import HotSquareTask, make_corpus

TAG_STREAM = 7
TAG_PROBABILITY = 0.3


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(x, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def random_tag_sets(count: int, seed: int, p: float = TAG_PROBABILITY) -> list[frozenset[benchmark.ChallengeTag]]:
    rng = Pcg32(seed, TAG_STREAM)
    draws = rng.random(count * len(benchmark.TAGS)).reshape(count, len(benchmark.TAGS))
    return [frozenset(t for t, u in zip(benchmark.TAGS, row) if u < p) for row in draws]


def write_fixture(
    directory: str | os.PathLike,
    count: int = 20,
    seed: int = 0,
    size: int = 32,
    test_fraction: float = 0.5,
    saliency: str | None = "noisy",
) -> benchmark.DatasetIndex:
    """Writes ``count`` entries; the first ``round(count * test_fraction)`` are in the test split.

    ``saliency`` is ``"perfect"`` (maps equal the masks), ``"noisy"``
    (mask blended with seeded noise) or None (no saliency directory).
    """
    root = Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    task = HotSquareTask(size=size, train_count=count, test_count=0, min_side=max(1, size // 8), max_side=max(1, size // 2))
    corpus = make_corpus(task, seed, "train")
    tags = random_tag_sets(count, seed)
    n_test = int(round(count * test_fraction))
    noise = Pcg32(seed, TAG_STREAM + 1)
    entries = []
    if saliency is not None:
        (root / "saliency").mkdir(exist_ok=True)
    for i in range(count):
        eid = f"s{i:04d}"
        rgb, t, gt = f"images/{eid}_rgb.ppm", f"images/{eid}_t.pgm", f"images/{eid}_gt.pgm"
        netpbm.write(root / rgb, _to_u8(np.transpose(corpus.rgb[i], (1, 2, 0))))
        netpbm.write(root / t, _to_u8(corpus.thermal[i, 0]))
        mask = (corpus.gt[i, 0] * 255).astype(np.uint8)
        netpbm.write(root / gt, mask)
        if saliency == "perfect":
            netpbm.write(root / "saliency" / f"{eid}.pgm", mask)
        elif saliency == "noisy":
            s = 0.6 * corpus.gt[i, 0] + 0.4 * noise.random(size * size).reshape(size, size)
            netpbm.write(root / "saliency" / f"{eid}.pgm", _to_u8(s))
        entries.append(benchmark.Entry(eid, rgb, t, gt, "test" if i < n_test else "train", tags[i]))
    idx = benchmark.DatasetIndex(tuple(entries), root)
    benchmark.save_index(idx, root / "index.csv")
    return idx
