"""Compiled kernel vs pure-Python fallback: identical outputs, bit for bit."""

import numpy as np
import pytest

from colorwai._kernels import KERNEL_BACKEND, fallback

compiled = pytest.importorskip("colorwai._kernels._palette")


def random_points(seed, n, spread=25.0):
    rng = np.random.default_rng(seed)
    pts = np.ascontiguousarray(rng.normal(50, spread, size=(n, 3)))
    w = np.abs(rng.normal(1.0, 0.3, size=n)) + 1e-3
    return pts, np.ascontiguousarray(w)


@pytest.mark.parametrize("seed,n", [(0, 100), (1, 1000), (2, 5000), (3, 17)])
def test_bitwise_parity(seed, n):
    pts, w = random_points(seed, n)
    c1, w1 = compiled.leader_follower_cluster(pts, w, 20.0, 10.0)
    c2, w2 = fallback.leader_follower_cluster(pts, w, 20.0, 10.0)
    assert np.array_equal(c1, c2)
    assert np.array_equal(w1, w2)


def test_parity_on_real_pixels():
    from colorwai import texgen
    from colorwai.colorlab import rgb_to_lab_array

    gen = texgen.ProceduralGenerator()
    for seed in range(5):
        img = texgen.synthesize(gen, texgen.sample_latent(gen, 300 + seed))
        lab = np.ascontiguousarray(rgb_to_lab_array(img).reshape(-1, 3))
        ones = np.ones(len(lab))
        c1, w1 = compiled.leader_follower_cluster(lab, ones, 20.0, 10.0)
        c2, w2 = fallback.leader_follower_cluster(lab, ones, 20.0, 10.0)
        assert np.array_equal(c1, c2) and np.array_equal(w1, w2)


def test_weight_conservation():
    pts, w = random_points(7, 800)
    _, cw = compiled.leader_follower_cluster(pts, w, 30.0, 15.0)
    assert cw.sum() == pytest.approx(w.sum(), rel=1e-12)


def test_tight_threshold_keeps_all_points():
    pts, w = random_points(8, 50, spread=100.0)
    cents, cw = compiled.leader_follower_cluster(pts, w, 1e-9, 5e-10)
    assert len(cents) == 50


def test_merge_pass_fuses_near_centroids():
    pts = np.ascontiguousarray(np.array([[0.0, 0, 0], [100.0, 0, 0], [3.0, 0, 0]]))
    w = np.ones(3)
    # spawn=2: three clusters created; merge=8 fuses the two near ones
    cents, cw = compiled.leader_follower_cluster(pts, w, 2.0, 8.0)
    assert len(cents) == 2
    assert cw.tolist() == [2.0, 1.0]
    assert cents[0, 0] == pytest.approx(1.5)


def test_empty_input():
    empty = np.empty((0, 3))
    c, w = compiled.leader_follower_cluster(empty, np.empty(0), 20.0, 10.0)
    assert len(c) == 0 and len(w) == 0


def test_backend_selected():
    assert KERNEL_BACKEND in ("cython", "python")


def test_env_var_forces_fallback():
    import os
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import colorwai; print(colorwai.KERNEL_BACKEND)"],
        env={**os.environ, "COLORWAI_PURE_PYTHON": "1"},
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
