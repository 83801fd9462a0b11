# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled leader-follower clustering kernel.

Sequential, data-dependent loop over points: unvectorizable in numpy, and the
single hottest path in the pipeline (every image annotation runs it over all
pixels).  The pure-Python fallback in ``fallback.py`` implements the exact
same arithmetic in the same order; outputs must match bit for bit.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def leader_follower_cluster(double[:, ::1] points, double[::1] weights,
                            double spawn_threshold, double merge_threshold):
    """Cluster rows of ``points`` (Lab coordinates) by leader-follower
    assignment followed by a closest-pair merge pass.

    Returns ``(centroids, cluster_weights)`` in post-merge creation order.
    """
    cdef Py_ssize_t n = points.shape[0]
    if n == 0:
        return np.empty((0, 3), dtype=np.float64), np.empty(0, dtype=np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=2] cent_arr = np.empty((n, 3), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cw_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] cent = cent_arr
    cdef double[::1] cw = cw_arr

    cdef double spawn2 = spawn_threshold * spawn_threshold
    cdef double merge2 = merge_threshold * merge_threshold

    cdef Py_ssize_t n_clusters = 0
    cdef Py_ssize_t i, c, best
    cdef double px, py, pz, w, dx, dy, dz, d2, best_d2, wnew, frac

    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        w = weights[i]
        best = -1
        best_d2 = 0.0
        for c in range(n_clusters):
            dx = cent[c, 0] - px
            dy = cent[c, 1] - py
            dz = cent[c, 2] - pz
            d2 = (dx * dx + dy * dy) + dz * dz
            if best < 0 or d2 < best_d2:
                best = c
                best_d2 = d2
        if best >= 0 and best_d2 <= spawn2:
            wnew = cw[best] + w
            frac = w / wnew
            cent[best, 0] = cent[best, 0] + (px - cent[best, 0]) * frac
            cent[best, 1] = cent[best, 1] + (py - cent[best, 1]) * frac
            cent[best, 2] = cent[best, 2] + (pz - cent[best, 2]) * frac
            cw[best] = wnew
        else:
            cent[n_clusters, 0] = px
            cent[n_clusters, 1] = py
            cent[n_clusters, 2] = pz
            cw[n_clusters] = w
            n_clusters += 1

    # Merge pass: repeatedly fuse the globally closest centroid pair while it
    # sits under the merge threshold.  Lower index absorbs, order preserved.
    cdef Py_ssize_t a, b, best_a, best_b, k
    while n_clusters > 1:
        best_a = -1
        best_b = -1
        best_d2 = 0.0
        for a in range(n_clusters):
            for b in range(a + 1, n_clusters):
                dx = cent[a, 0] - cent[b, 0]
                dy = cent[a, 1] - cent[b, 1]
                dz = cent[a, 2] - cent[b, 2]
                d2 = (dx * dx + dy * dy) + dz * dz
                if best_a < 0 or d2 < best_d2:
                    best_a = a
                    best_b = b
                    best_d2 = d2
        if best_d2 >= merge2:
            break
        wnew = cw[best_a] + cw[best_b]
        frac = cw[best_b] / wnew
        cent[best_a, 0] = cent[best_a, 0] + (cent[best_b, 0] - cent[best_a, 0]) * frac
        cent[best_a, 1] = cent[best_a, 1] + (cent[best_b, 1] - cent[best_a, 1]) * frac
        cent[best_a, 2] = cent[best_a, 2] + (cent[best_b, 2] - cent[best_a, 2]) * frac
        cw[best_a] = wnew
        for k in range(best_b, n_clusters - 1):
            cent[k, 0] = cent[k + 1, 0]
            cent[k, 1] = cent[k + 1, 1]
            cent[k, 2] = cent[k + 1, 2]
            cw[k] = cw[k + 1]
        n_clusters -= 1

    return cent_arr[:n_clusters].copy(), cw_arr[:n_clusters].copy()
