"""Clustering kernel selection: compiled extension if available, else the
pure-Python twin.  Set COLORWAI_PURE_PYTHON=1 to force the fallback."""

import os

from colorwai._kernels import fallback as _fallback

if os.environ.get("COLORWAI_PURE_PYTHON", "") not in ("", "0"):
    leader_follower_cluster = _fallback.leader_follower_cluster
    KERNEL_BACKEND = "python"
else:
    try:
        from colorwai._kernels._palette import leader_follower_cluster

        KERNEL_BACKEND = "cython"
    except ImportError:
        leader_follower_cluster = _fallback.leader_follower_cluster
        KERNEL_BACKEND = "python"

__all__ = ["leader_follower_cluster", "KERNEL_BACKEND"]
