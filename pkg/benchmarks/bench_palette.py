#!/usr/bin/env python3
"""Benchmark the compiled clustering kernel against the pure-Python twin.

The leader-follower loop runs once per annotated image, over every pixel, so
it dominates coupling and evaluation time.  Run after `pip install -e .`:

    python benchmarks/bench_palette.py [--images 20] [--resolution 64]
"""

import argparse
import time

import numpy as np

from colorwai import texgen
from colorwai._kernels import fallback
from colorwai.colorlab import rgb_to_lab_array

try:
    from colorwai._kernels import _palette as compiled
except ImportError:
    compiled = None


def pixel_batches(n_images: int, resolution: int) -> list:
    gen = texgen.ProceduralGenerator(resolution=resolution)
    batches = []
    for i in range(n_images):
        img = texgen.synthesize(gen, texgen.sample_latent(gen, 4000 + i))
        batches.append(np.ascontiguousarray(rgb_to_lab_array(img).reshape(-1, 3)))
    return batches


def run(impl, batches) -> float:
    weights = np.ones(batches[0].shape[0])
    start = time.perf_counter()
    for lab in batches:
        impl.leader_follower_cluster(lab, weights, 20.0, 10.0)
    return time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--images", type=int, default=20)
    parser.add_argument("--resolution", type=int, default=64)
    args = parser.parse_args()

    batches = pixel_batches(args.images, args.resolution)
    pixels = args.images * args.resolution**2

    t_py = run(fallback, batches)
    print(f"pure python : {t_py:8.3f} s  ({pixels / t_py / 1e3:8.1f} kpx/s)")
    if compiled is None:
        print("compiled kernel not built; install with `pip install -e .`")
        return
    t_cy = run(compiled, batches)
    print(f"cython      : {t_cy:8.3f} s  ({pixels / t_cy / 1e3:8.1f} kpx/s)")
    print(f"speedup     : {t_py / t_cy:8.1f}x")

    ref = fallback.leader_follower_cluster(batches[0], np.ones(len(batches[0])), 20.0, 10.0)
    out = compiled.leader_follower_cluster(batches[0], np.ones(len(batches[0])), 20.0, 10.0)
    same = np.array_equal(ref[0], out[0]) and np.array_equal(ref[1], out[1])
    print(f"bitwise parity: {same}")


if __name__ == "__main__":
    main()
