"""Linear classifiers, Shapley attribution, SSIM, and small-network training
primitives shared by the disentanglement and evaluation stages."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import expit

MAX_ITERS = 5000
GRAD_TOL = 1e-6

# Running audit of the Shapley efficiency axiom over every attribution
# computed in-process (sum phi == f(x) - f(background) for linear models).
EFFICIENCY_AUDIT = {"count": 0, "max_residual": 0.0, "violations": 0}
EFFICIENCY_TOL = 1e-9


def reset_efficiency_audit() -> None:
    EFFICIENCY_AUDIT.update(count=0, max_residual=0.0, violations=0)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class LabeledLatentSet:
    codes: np.ndarray
    labels: np.ndarray
    space_tag: str = "w-analog"

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.codes.ndim != 2 or len(self.codes) != len(self.labels):
            raise ValueError("codes must be N x D with one label per row")
        if len(self.codes) < 2:
            raise ValueError("need at least two samples")
        if not np.all(np.isfinite(self.codes)):
            raise ValueError("non-finite latent coordinates")

    @property
    def dim(self) -> int:
        return self.codes.shape[1]


@dataclass
class LinearClassifier:
    weights: np.ndarray
    bias: float
    kind: str = "logistic"
    c_reg: float = 0.1
    n_iter: int = 0
    grad_norm: float = float("nan")

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite classifier weights")


@dataclass
class ShapleyAttribution:
    phi: np.ndarray
    background: np.ndarray


@dataclass
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("ssim window must be odd and >= 3")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("ssim stabilizers must be positive")


# ---------------------------------------------------------------------------
# Classifier training
# ---------------------------------------------------------------------------

def balanced_subsample(codes, labels, seed):
    """Equalize class sizes by seeded subsampling of the majority class.

    Returns (codes, y) with y in {-1, +1}, rows kept in original order."""
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("degenerate labels")
    rng = np.random.default_rng(seed)
    if len(pos) > len(neg):
        pos = np.sort(rng.choice(pos, size=len(neg), replace=False))
    elif len(neg) > len(pos):
        neg = np.sort(rng.choice(neg, size=len(pos), replace=False))
    keep = np.sort(np.concatenate([pos, neg]))
    y = np.where(labels[keep], 1.0, -1.0)
    return codes[keep], y


def train_linear_classifier(data: LabeledLatentSet, kind: str = "logistic",
                            c_reg: float = 0.1, seed: int = 0) -> LinearClassifier:
    """Full-batch gradient descent on L2-regularized logistic or hinge loss.

    Classes are balanced first by seeded subsampling of the majority class.
    The regularization weight is 1/(c_reg * N); pass c_reg=inf to disable the
    penalty entirely.  Deterministic for a fixed (data, seed, config).
    """
    if kind not in ("logistic", "hinge"):
        raise ValueError(f"unknown classifier kind {kind!r}")
    labels = np.asarray(data.labels).astype(bool)
    X, y = balanced_subsample(data.codes, labels, seed)
    n, d = X.shape
    lam = 0.0 if math.isinf(c_reg) else 1.0 / (c_reg * n)

    # Lipschitz bound on the gradient via the spectral norm of [X, 1].
    aug = np.hstack([X, np.ones((n, 1))])
    sigma_max = float(np.linalg.svd(aug, compute_uv=False)[0])
    if kind == "logistic":
        step = 1.0 / (sigma_max**2 / (4.0 * n) + lam + 1e-12)
    else:
        step = 1.0 / (sigma_max**2 / n + lam + 1e-12)

    w = np.zeros(d)
    b = 0.0
    grad_norm = np.inf
    it = 0
    for it in range(1, MAX_ITERS + 1):
        margins = y * (X @ w + b)
        if kind == "logistic":
            coef = y * expit(-margins)
        else:
            coef = y * (margins < 1.0)
        gw = -(X.T @ coef) / n + lam * w
        gb = -float(np.sum(coef)) / n
        grad_norm = float(np.sqrt(np.sum(gw * gw) + gb * gb))
        if grad_norm < GRAD_TOL:
            break
        if kind == "hinge":
            # subgradient method: decaying step for the nonsmooth loss
            s = step / math.sqrt(it)
        else:
            s = step
        w = w - s * gw
        b = b - s * gb
    return LinearClassifier(weights=w, bias=b, kind=kind, c_reg=c_reg,
                            n_iter=it, grad_norm=grad_norm)


def decision_value(clf: LinearClassifier, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != clf.weights.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {clf.weights.shape}")
    return float(clf.weights @ x + clf.bias)


def decision_values(clf: LinearClassifier, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != clf.weights.shape[0]:
        raise ValueError("dimension mismatch")
    return X @ clf.weights + clf.bias


# ---------------------------------------------------------------------------
# Shapley attribution
# ---------------------------------------------------------------------------

def _audit_efficiency(total_phi: float, delta_f: float) -> None:
    residual = abs(total_phi - delta_f)
    EFFICIENCY_AUDIT["count"] += 1
    if residual > EFFICIENCY_AUDIT["max_residual"]:
        EFFICIENCY_AUDIT["max_residual"] = residual
    if residual > EFFICIENCY_TOL:
        EFFICIENCY_AUDIT["violations"] += 1


def shapley_linear(clf: LinearClassifier, x: np.ndarray,
                   background: np.ndarray) -> ShapleyAttribution:
    """Exact Shapley values of a linear model: phi_i = w_i (x_i - bg_i)."""
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if x.shape != clf.weights.shape or background.shape != clf.weights.shape:
        raise ValueError("dimension mismatch")
    phi = clf.weights * (x - background)
    _audit_efficiency(float(np.sum(phi)),
                      decision_value(clf, x) - decision_value(clf, background))
    return ShapleyAttribution(phi=phi, background=background)


def shapley_exact(value_fn, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Classical Shapley values by enumerating all 2^D coalitions.

    Absent features take their background coordinates.  Exponential cost, so
    D is capped at 12; this exists as the verification oracle for the linear
    closed form.
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    d = len(x)
    if d > 12:
        raise ValueError("enumeration too large")

    values = {}
    for mask in range(1 << d):
        point = background.copy()
        for i in range(d):
            if mask >> i & 1:
                point[i] = x[i]
        values[mask] = float(value_fn(point))

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    others = list(range(d))
    for i in range(d):
        rest = [j for j in others if j != i]
        for r in range(d):
            weight = fact[r] * fact[d - r - 1] / fact[d]
            for subset in itertools.combinations(rest, r):
                mask = 0
                for j in subset:
                    mask |= 1 << j
                phi[i] += weight * (values[mask | (1 << i)] - values[mask])
    return phi


def mean_abs_importance(clf: LinearClassifier, data: LabeledLatentSet) -> np.ndarray:
    """Mean |phi| per dimension against the dataset-mean background,
    normalized to a probability vector."""
    codes = data.codes
    background = codes.mean(axis=0)
    acc = np.zeros(data.dim)
    for row in codes:
        acc += np.abs(shapley_linear(clf, row, background).phi)
    acc /= len(codes)
    total = float(acc.sum())
    if total <= 0.0:
        raise ValueError("no variance")
    return acc / total


# ---------------------------------------------------------------------------
# SSIM
# ---------------------------------------------------------------------------

def _gaussian_window(window: int, sigma: float) -> np.ndarray:
    half = window // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(xs**2) / (2.0 * sigma**2))
    return g / g.sum()


def _local_mean(plane: np.ndarray, win: np.ndarray) -> np.ndarray:
    out = correlate1d(plane, win, axis=0, mode="reflect")
    return correlate1d(out, win, axis=1, mode="reflect")


def ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean local SSIM with a Gaussian window, averaged over channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    win = _gaussian_window(cfg.window, cfg.sigma)
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    vals = []
    for ch in range(a.shape[-1]):
        x, y = a[..., ch], b[..., ch]
        mu_x = _local_mean(x, win)
        mu_y = _local_mean(y, win)
        var_x = _local_mean(x * x, win) - mu_x * mu_x
        var_y = _local_mean(y * y, win) - mu_y * mu_y
        cov = _local_mean(x * y, win) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


def psnr(a: np.ndarray, b: np.ndarray, dynamic_range: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(dynamic_range**2 / mse)


# ---------------------------------------------------------------------------
# Small-network training primitives
# ---------------------------------------------------------------------------

def sinusoidal_embedding(t, dim: int) -> np.ndarray:
    """Transformer-style sin/cos position embedding of timestep ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    return emb if emb.shape[0] > 1 else emb[0]


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0


def adam_step(params: list, grads: list, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place Adam update over a flat list of parameter arrays."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
