"""Compiled vs numpy-fallback kernel timings, plus one full training step.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each row is the best of ``--repeat`` timed runs; the ratio column is
python time over compiled time.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from salbench import network as N
from salbench import tensor as T
from salbench.synthetic import HotSquareTask, make_corpus


def cases(rng):
    x = rng.uniform(-1, 1, (8, 16, 32, 32))
    conv = T.ConvParams.same(rng.uniform(-0.1, 0.1, (16, 16, 3, 3)))
    y = T.conv2d(x, conv)
    x_big = rng.uniform(-1, 1, (8, 3, 64, 64))
    conv_in = T.ConvParams.same(rng.uniform(-0.1, 0.1, (8, 3, 3, 3)))
    small = rng.uniform(-1, 1, (8, 16, 8, 8))
    net = N.adfnet_init(N.NetConfig(), 0)
    data = make_corpus(HotSquareTask(train_count=8, test_count=1), 0, "train")
    return {
        "conv2d 3x3 16->16 @32 (n=8)": lambda: T.conv2d(x, conv),
        "conv2d_grad 3x3 16->16 @32": lambda: T.conv2d_grad(x, conv, y),
        "conv2d 3x3 3->8 @64 (n=8)": lambda: T.conv2d(x_big, conv_in),
        "maxpool2 16ch @32": lambda: T.maxpool2(x),
        "upsample_bilinear 8->32": lambda: T.upsample_bilinear(small, 32, 32),
        "train_step (default net, batch 8)": lambda: N.train_step(net, data.rgb, data.thermal, data.gt, 0.01),
    }


def time_backend(name: str, repeat: int) -> dict[str, float]:
    T.set_backend(name)
    out = {}
    for label, fn in cases(np.random.default_rng(0)).items():
        fn()  # warm-up
        out[label] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = T.available_backends()
    results = {b: time_backend(b, args.repeat) for b in backends}
    labels = list(results[backends[0]])
    print(f"{'kernel':38s}" + "".join(f"{b:>12s}" for b in backends) + ("       ratio" if len(backends) == 2 else ""))
    for label in labels:
        row = f"{label:38s}" + "".join(f"{results[b][label] * 1e3:10.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{results['python'][label] / results['compiled'][label]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
