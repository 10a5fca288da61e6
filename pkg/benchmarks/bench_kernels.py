"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--no-train]

Each kernel is timed on detector-sized inputs under both backends (best of
``--repeat`` runs). Unless ``--no-train`` is given, 20 training iterations
are also timed in a subprocess per backend, selected via DA_DETECT_PURE.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from da_detect.kernels import _pykernels as py

try:
    from da_detect.kernels import _ckernels as cy
except ImportError:
    cy = None


def _boxes(rng, n, size=64.0):
    xy = rng.uniform(0, size - 8, (n, 2))
    wh = rng.uniform(4, 24, (n, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def _roi_bins(rng, R, H, W, out=4):
    y0 = rng.integers(0, H - 4, R)
    x0 = rng.integers(0, W - 4, R)
    h = rng.integers(4, H // 2, R)
    w = rng.integers(4, W // 2, R)
    edges = np.linspace(0, 1, out + 1)
    hs = np.minimum(y0[:, None] + np.floor(edges[:-1] * h[:, None]).astype(np.int64), H)
    he = np.minimum(y0[:, None] + np.ceil(edges[1:] * h[:, None]).astype(np.int64), H)
    ws = np.minimum(x0[:, None] + np.floor(edges[:-1] * w[:, None]).astype(np.int64), W)
    we = np.minimum(x0[:, None] + np.ceil(edges[1:] * w[:, None]).astype(np.int64), W)
    return hs, he, ws, we


def cases():
    rng = np.random.default_rng(0)
    a, b = _boxes(rng, 300), _boxes(rng, 64)
    nb = _boxes(rng, 600)
    order = np.argsort(-rng.random(600)).astype(np.int64)
    fm = rng.standard_normal((32, 16, 16)).astype(np.float32)
    bins = _roi_bins(rng, 64, 16, 16)
    _, argmax = py.roi_pool_forward(fm, *bins)
    g = rng.standard_normal(argmax.shape).astype(np.float32)
    xp = rng.standard_normal((1, 16, 66, 66)).astype(np.float32)
    cols = py.im2col(xp, 3, 3, 1)
    blob = rng.bytes(1 << 16)
    return {
        "iou_matrix 300x64": lambda k: k.iou_matrix(a, b),
        "nms_sorted 600": lambda k: k.nms_sorted(nb, order, 0.7),
        "roi_pool_forward 64 rois": lambda k: k.roi_pool_forward(fm, *bins),
        "roi_pool_backward 64 rois": lambda k: k.roi_pool_backward(g, argmax, 16, 16),
        "im2col 16x66x66 k3": lambda k: k.im2col(xp, 3, 3, 1),
        "col2im 16x66x66 k3": lambda k: k.col2im(cols, xp.shape, 3, 3, 1),
        "fnv1a64 64 KiB": lambda k: k.fnv1a64(blob),
    }


def best_of(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


_TRAIN_SNIPPET = """
import time
from da_detect import kernels
from da_detect.synthdata import DatasetSpec, ShiftSpec, generate
from da_detect.training import Trainer, TrainConfig
src = generate(DatasetSpec(num_images=8, seed=1))
tgt = generate(DatasetSpec(num_images=8, seed=2, domain=1, shift=ShiftSpec("style", 0.8)))
tr = Trainer(TrainConfig(total_iters=25, lr_drop_iter=25), src, tgt)
tr.run(until=5)
t = time.perf_counter()
tr.run(until=25)
print(kernels.BACKEND, (time.perf_counter() - t) / 20)
"""


def train_step_time(pure):
    env = dict(os.environ, DA_DETECT_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", _TRAIN_SNIPPET], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    return out[0], float(out[1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats, best kept (default: 5)")
    ap.add_argument("--no-train", action="store_true", help="skip the training-step timing")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels unavailable; build with `pip install --no-build-isolation -e .`")
        return 1
    print(f"{'kernel':<28}{'numpy (us)':>12}{'cython (us)':>13}{'speedup':>9}")
    for name, fn in cases().items():
        tp = best_of(lambda: fn(py), args.repeat) * 1e6
        tc = best_of(lambda: fn(cy), args.repeat) * 1e6
        print(f"{name:<28}{tp:>12.1f}{tc:>13.1f}{tp / tc:>8.1f}x")
    if not args.no_train:
        timings = dict(train_step_time(p) for p in (True, False))
        print(f"{'train iteration (ms)':<28}{timings['python'] * 1e3:>12.1f}{timings['cython'] * 1e3:>13.1f}"
              f"{timings['python'] / timings['cython']:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
