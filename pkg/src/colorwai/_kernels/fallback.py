"""Pure-Python twin of the compiled clustering kernel.

Mirrors ``_palette.pyx`` operation for operation (same float64 expressions,
same association order, first-minimum tie breaks) so that both backends
produce bitwise-identical clusterings.
"""

import numpy as np


def leader_follower_cluster(points, weights, spawn_threshold, merge_threshold):
    """See ``colorwai._kernels.leader_follower_cluster``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        return np.empty((0, 3), dtype=np.float64), np.empty(0, dtype=np.float64)

    cent = np.empty((n, 3), dtype=np.float64)
    cw = np.empty(n, dtype=np.float64)
    spawn2 = spawn_threshold * spawn_threshold
    merge2 = merge_threshold * merge_threshold

    n_clusters = 0
    for i in range(n):
        p = points[i]
        w = weights[i]
        if n_clusters:
            delta = cent[:n_clusters] - p
            sq = delta * delta
            d2 = (sq[:, 0] + sq[:, 1]) + sq[:, 2]
            best = int(np.argmin(d2))
            best_d2 = d2[best]
            if best_d2 <= spawn2:
                wnew = cw[best] + w
                frac = w / wnew
                cent[best] = cent[best] + (p - cent[best]) * frac
                cw[best] = wnew
                continue
        cent[n_clusters] = p
        cw[n_clusters] = w
        n_clusters += 1

    while n_clusters > 1:
        live = cent[:n_clusters]
        diff = live[:, None, :] - live[None, :, :]
        sq = diff * diff
        d2 = (sq[:, :, 0] + sq[:, :, 1]) + sq[:, :, 2]
        iu = np.triu_indices(n_clusters, k=1)
        flat = d2[iu]
        k = int(np.argmin(flat))
        best_d2 = flat[k]
        if best_d2 >= merge2:
            break
        a, b = int(iu[0][k]), int(iu[1][k])
        wnew = cw[a] + cw[b]
        frac = cw[b] / wnew
        cent[a] = cent[a] + (cent[b] - cent[a]) * frac
        cw[a] = wnew
        cent[b:n_clusters - 1] = cent[b + 1:n_clusters]
        cw[b:n_clusters - 1] = cw[b + 1:n_clusters]
        n_clusters -= 1

    return cent[:n_clusters].copy(), cw[:n_clusters].copy()
