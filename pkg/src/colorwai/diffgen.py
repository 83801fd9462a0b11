"""Diffusion backend: forward noising, a small trained denoiser with a
128-wide bottleneck, deterministic DDIM sampling/inversion, and latent edits
injected at the mixing step.

The denoiser is a fully connected encoder/decoder (3072-512-128-512-3072,
SiLU, sinusoidal time embedding added at the encoder input) trained with the
eps-prediction objective on 32x32 renders.  Everything runs in numpy with
seeded generators, so training and sampling are bitwise reproducible.
Images live in [0,1] at the API boundary; diffusion states in [-1,1].
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from colorwai.numerics import AdamState, adam_step, sinusoidal_embedding

H_WIDTH = 128
_TEMB_DIM = 64


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if len(beta) != self.T or len(ab) != self.T:
            raise ValueError("schedule arrays must have length T")
        if np.any(beta <= 0) or np.any(beta >= 1) or np.any(np.diff(beta) < 0):
            raise ValueError("beta must be increasing within (0,1)")
        if np.any(np.diff(ab) >= 0) or np.any(ab <= 0) or np.any(ab >= 1):
            raise ValueError("alpha_bar must be strictly decreasing in (0,1)")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", ab)

    @classmethod
    def linear(cls, T: int = 1000, beta_min: float = 1e-4,
               beta_max: float = 0.02) -> "NoiseSchedule":
        beta = np.linspace(beta_min, beta_max, T)
        return cls(T=T, beta=beta, alpha_bar=np.cumprod(1.0 - beta))

    def alpha_bar_at(self, t: int) -> float:
        """Cumulative signal fraction; t=0 means the clean image."""
        if t == 0:
            return 1.0
        if not 1 <= t <= self.T:
            raise ValueError(f"timestep {t} outside [0,{self.T}]")
        return float(self.alpha_bar[t - 1])


def ddim_taus(sched: NoiseSchedule, steps: int) -> np.ndarray:
    """Monotone timestep sub-sequence 0..T used by DDIM."""
    if not 1 <= steps <= sched.T:
        raise ValueError("steps must divide the schedule into a monotone sub-sequence")
    taus = np.unique(np.round(np.linspace(0, sched.T, steps + 1)).astype(int))
    return taus


def forward_noise(x0: np.ndarray, t: int, eps: np.ndarray,
                  sched: NoiseSchedule) -> np.ndarray:
    """Closed-form forward marginal: sqrt(ab_t) x0 + sqrt(1-ab_t) eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {eps.shape}")
    ab = sched.alpha_bar_at(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def _silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _silu_grad(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


class Denoiser:
    """Eps-prediction MLP with an inspectable 128-wide bottleneck.

    The decoder output v feeds the noise prediction through the bounded
    identity eps_hat = sqrt(ab) v + sqrt(1-ab) x_t.  A raw eps head cannot
    beat rank 128 through the bottleneck (eps is full-rank noise), while the
    image content that v needs lives on a low-dimensional manifold that fits
    through it easily; the training objective stays the plain eps MSE.
    """

    def __init__(self, in_dim: int = 3072, seed: int = 0,
                 sched: NoiseSchedule | None = None):
        self.in_dim = in_dim
        self.arch = (in_dim, 512, H_WIDTH, 512, in_dim)
        self.sched = sched
        rng = np.random.default_rng(seed)

        def layer(n_in, n_out):
            return rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)

        self.params = {
            "Wt": layer(_TEMB_DIM, in_dim) * 0.1,
            "W1": layer(in_dim, 512), "b1": np.zeros(512),
            "W2": layer(512, H_WIDTH), "b2": np.zeros(H_WIDTH),
            "W3": layer(H_WIDTH, 512), "b3": np.zeros(512),
            "W4": layer(512, in_dim) * 0.1, "b4": np.zeros(in_dim),
        }
        self.final_loss = float("nan")
        self.init_loss = float("nan")
        self.loss_history: list = []
        self.probe_history: list = []
        self.space_tag = "h-analog"

    @property
    def h_width(self) -> int:
        return H_WIDTH

    def _temb(self, t) -> np.ndarray:
        return np.atleast_2d(sinusoidal_embedding(np.asarray(t, dtype=np.float64), _TEMB_DIM))

    def _ab_of(self, t, n: int) -> np.ndarray:
        if self.sched is None:
            raise ValueError("denoiser has no schedule attached")
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (n,))
        ab = np.where(t == 0, 1.0, self.sched.alpha_bar[np.maximum(t, 1) - 1])
        return ab

    def forward(self, x: np.ndarray, t, h_shift: np.ndarray | None = None,
                want_cache: bool = False):
        """Predict eps for a batch of flat states. Optionally shift the
        bottleneck activation (the h-space edit hook)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        p = self.params
        temb = self._temb(np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],)))
        a0 = x + temb @ p["Wt"]
        z1 = a0 @ p["W1"] + p["b1"]
        a1 = _silu(z1)
        h = a1 @ p["W2"] + p["b2"]
        if h_shift is not None:
            h = h + h_shift
        z2 = h @ p["W3"] + p["b3"]
        a2 = _silu(z2)
        g = a2 @ p["W4"] + p["b4"]
        ab = self._ab_of(t, x.shape[0])[:, None]
        out = np.sqrt(ab) * g + np.sqrt(1.0 - ab) * x
        if want_cache:
            return out, (x, temb, a0, z1, a1, h, z2, a2, ab)
        return out

    def predict_eps(self, x: np.ndarray, t, h_shift=None) -> np.ndarray:
        single = np.asarray(x).ndim == 1
        out = self.forward(x, t, h_shift=h_shift)
        return out[0] if single else out

    def h_activation_batch(self, x: np.ndarray, t) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        p = self.params
        temb = self._temb(np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],)))
        a1 = _silu((x + temb @ p["Wt"]) @ p["W1"] + p["b1"])
        return a1 @ p["W2"] + p["b2"]

    # -- persistence: JSON header line + concatenated float64 tensors --

    _PARAM_ORDER = ("Wt", "W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")

    def save(self, path, sched: NoiseSchedule) -> None:
        header = {
            "version": 1,
            "arch": list(self.arch),
            "T": sched.T,
            "beta_min": float(sched.beta[0]),
            "beta_max": float(sched.beta[-1]),
            "temb_dim": _TEMB_DIM,
            "final_loss": self.final_loss,
        }
        blob = json.dumps(header).encode()
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for name in self._PARAM_ORDER:
                fh.write(np.ascontiguousarray(self.params[name]).tobytes())

    @classmethod
    def load(cls, path) -> tuple["Denoiser", NoiseSchedule]:
        with open(path, "rb") as fh:
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen).decode())
            den = cls(in_dim=header["arch"][0])
            for name in cls._PARAM_ORDER:
                shape = den.params[name].shape
                buf = fh.read(int(np.prod(shape)) * 8)
                den.params[name] = np.frombuffer(buf, dtype=np.float64).reshape(shape).copy()
        den.final_loss = header.get("final_loss", float("nan"))
        sched = NoiseSchedule.linear(header["T"], header["beta_min"], header["beta_max"])
        den.sched = sched
        return den, sched


MIN_DRAWS_PER_EPOCH = 128


def train_denoiser(corpus, sched: NoiseSchedule, epochs: int = 50, seed: int = 0,
                   lr: float = 1e-3, batch_size: int = 16) -> Denoiser:
    """Train an eps-prediction denoiser on a stack of [0,1] images.

    Full numpy training loop (manual backprop + Adam) driven by a single
    seeded generator: identical (corpus, seed, config) gives identical
    weights.  Tiny corpora still get MIN_DRAWS_PER_EPOCH (t, eps) draws per
    epoch so the fixed epoch budget means a fixed optimization budget.
    """
    corpus = np.asarray(corpus, dtype=np.float64)
    if corpus.ndim != 4 or corpus.shape[0] == 0:
        raise ValueError("corpus must be a nonempty stack of images")
    n = corpus.shape[0]
    flat = 2.0 * corpus.reshape(n, -1) - 1.0

    rng = np.random.default_rng(seed)
    den = Denoiser(in_dim=flat.shape[1], seed=seed, sched=sched)
    p = den.params
    order = den._PARAM_ORDER
    adam = AdamState()

    # fixed probe set: paired before/after loss comparisons stay meaningful
    probe_idx = rng.integers(0, n, size=256)
    probe_t = rng.integers(1, sched.T + 1, size=len(probe_idx))
    probe_eps = rng.standard_normal((len(probe_idx), flat.shape[1]))
    probe_ab = sched.alpha_bar[probe_t - 1][:, None]
    probe_xt = np.sqrt(probe_ab) * flat[probe_idx] + np.sqrt(1.0 - probe_ab) * probe_eps

    def probe_loss():
        return float(np.mean((den.forward(probe_xt, probe_t) - probe_eps) ** 2))

    den.init_loss = probe_loss()

    epoch_loss = float("nan")
    for _ in range(epochs):
        if n >= MIN_DRAWS_PER_EPOCH:
            pool = rng.permutation(n)
        else:
            pool = rng.integers(0, n, size=MIN_DRAWS_PER_EPOCH)
        losses = []
        for start in range(0, len(pool), batch_size):
            idx = pool[start:start + batch_size]
            x0 = flat[idx]
            t = rng.integers(1, sched.T + 1, size=len(idx))
            eps = rng.standard_normal(x0.shape)
            ab = sched.alpha_bar[t - 1][:, None]
            xt = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps

            out, cache = den.forward(xt, t, want_cache=True)
            x, temb, a0, z1, a1, h, z2, a2, ab_col = cache
            diff = out - eps
            losses.append(float(np.mean(diff * diff)))

            # d(eps_hat)/d(v) = sqrt(ab) per row
            d_eps = 2.0 * diff / diff.size
            d_out = d_eps * np.sqrt(ab_col)
            g = {}
            g["W4"] = a2.T @ d_out
            g["b4"] = d_out.sum(axis=0)
            d_a2 = d_out @ p["W4"].T
            d_z2 = d_a2 * _silu_grad(z2)
            g["W3"] = h.T @ d_z2
            g["b3"] = d_z2.sum(axis=0)
            d_h = d_z2 @ p["W3"].T
            g["W2"] = a1.T @ d_h
            g["b2"] = d_h.sum(axis=0)
            d_a1 = d_h @ p["W2"].T
            d_z1 = d_a1 * _silu_grad(z1)
            g["W1"] = a0.T @ d_z1
            g["b1"] = d_z1.sum(axis=0)
            d_a0 = d_z1 @ p["W1"].T
            g["Wt"] = temb.T @ d_a0

            # linear warmup tames the first Adam steps (the v-head already
            # starts as a decent predictor and is easy to overshoot)
            warm = min(1.0, (adam.t + 1) / 100.0)
            adam_step([p[k] for k in order], [g[k] for k in order], adam, lr=lr * warm)
        epoch_loss = float(np.mean(losses))
        den.loss_history.append(epoch_loss)
        den.probe_history.append(probe_loss())
    den.final_loss = epoch_loss
    return den


class OracleDenoiser:
    """Verification double that knows the true clean state.

    Returns the exact noise consistent with its anchor image, which makes the
    predicted image P_t identical to x0 at every step and the DDIM
    invert-then-sample round trip algebraically exact.
    """

    def __init__(self, x0_state: np.ndarray, sched: NoiseSchedule):
        self.x0 = np.asarray(x0_state, dtype=np.float64).reshape(-1)
        self.sched = sched
        self.h_width = H_WIDTH
        self.space_tag = "h-analog"

    def forward(self, x, t, h_shift=None, want_cache=False):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ab = self.sched.alpha_bar_at(int(np.ravel(t)[0]))
        if ab == 1.0:
            out = np.zeros_like(x)
        else:
            out = (x - np.sqrt(ab) * self.x0[None, :]) / np.sqrt(1.0 - ab)
        if want_cache:
            return out, None
        return out

    def predict_eps(self, x, t, h_shift=None):
        single = np.asarray(x).ndim == 1
        out = self.forward(x, t)
        return out[0] if single else out


# ---------------------------------------------------------------------------
# DDIM stepping, inversion, and edits
# ---------------------------------------------------------------------------

@dataclass
class DdimTrajectory:
    states: list  # ordered (t, flat state) pairs, t ascending
    step_indices: np.ndarray
    image_shape: tuple

    def state_at(self, t: int) -> np.ndarray:
        for ti, s in self.states:
            if ti == t:
                return s
        raise ValueError(f"timestep {t} not on the trajectory")

    def image_at(self, t: int) -> np.ndarray:
        return state_to_image(self.state_at(t), self.image_shape)


def image_to_state(img: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(img, dtype=np.float64).reshape(-1) - 1.0


def state_to_image(state: np.ndarray, shape) -> np.ndarray:
    return np.clip((state.reshape(shape) + 1.0) / 2.0, 0.0, 1.0)


def _move(x, t_from: int, t_to: int, den: Denoiser, sched: NoiseSchedule,
          h_shift=None):
    """One deterministic DDIM transition between arbitrary timesteps."""
    ab_from = sched.alpha_bar_at(t_from)
    ab_to = sched.alpha_bar_at(t_to)
    eps = den.forward(x, t_from, h_shift=h_shift)
    pred = (x - np.sqrt(1.0 - ab_from) * eps) / np.sqrt(ab_from)
    return np.sqrt(ab_to) * pred + np.sqrt(1.0 - ab_to) * eps


def ddim_step(x_t: np.ndarray, t: int, t_prev: int, den: Denoiser,
              sched: NoiseSchedule) -> np.ndarray:
    """Deterministic reverse step t -> t_prev (eta = 0, no noise term)."""
    if t_prev > t or t_prev < 0:
        raise ValueError(f"t ordering violated: t={t}, t_prev={t_prev}")
    x_t = np.asarray(x_t, dtype=np.float64)
    if t_prev == t:
        return x_t.copy()
    single = x_t.ndim == 1
    out = _move(x_t, t, t_prev, den, sched)
    return out[0] if single else out


def ddim_invert(x0: np.ndarray, den: Denoiser, sched: NoiseSchedule,
                steps: int = 50) -> DdimTrajectory:
    """Run the DDIM recursion in reverse (0 -> T), storing every visited
    state so the mixing step can be read back later."""
    x0 = np.asarray(x0, dtype=np.float64)
    shape = x0.shape
    taus = ddim_taus(sched, steps)
    x = image_to_state(x0)[None, :]
    states = [(0, x[0].copy())]
    for i in range(len(taus) - 1):
        x = _move(x, int(taus[i]), int(taus[i + 1]), den, sched)
        states.append((int(taus[i + 1]), x[0].copy()))
    return DdimTrajectory(states=states, step_indices=taus, image_shape=shape)


def invert_batch(images: np.ndarray, den: Denoiser, sched: NoiseSchedule,
                 steps: int = 50, up_to: int | None = None) -> tuple[np.ndarray, int]:
    """Invert a stack of images together; returns (states, reached_t).

    ``up_to`` stops early at the nearest sub-sequence step (used to read the
    mixing-step latent without paying for the full chain)."""
    images = np.asarray(images, dtype=np.float64)
    n = images.shape[0]
    taus = ddim_taus(sched, steps)
    if up_to is not None:
        stop = int(taus[np.argmin(np.abs(taus - up_to))])
    else:
        stop = int(taus[-1])
    x = 2.0 * images.reshape(n, -1) - 1.0
    t_cur = 0
    for i in range(len(taus) - 1):
        if t_cur >= stop:
            break
        x = _move(x, int(taus[i]), int(taus[i + 1]), den, sched)
        t_cur = int(taus[i + 1])
    return x, t_cur


@dataclass(frozen=True)
class MixingConfig:
    t_mix: int = 350
    target: str = "h-space"  # or "input-space"

    def __post_init__(self):
        if self.target not in ("h-space", "input-space"):
            raise ValueError(f"unknown mixing target {self.target!r}")


def snap_to_tau(sched: NoiseSchedule, steps: int, t: int) -> int:
    taus = ddim_taus(sched, steps)
    if not 0 < t < sched.T:
        raise ValueError(f"t_mix {t} outside (0,{sched.T})")
    return int(taus[np.argmin(np.abs(taus - t))])


def h_activation(den: Denoiser, x_t: np.ndarray, t: int) -> np.ndarray:
    """Bottleneck activation of a diffusion state (the h-analog latent)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    single = x_t.ndim <= 1 or (x_t.ndim == 3)
    flat = x_t.reshape(1, -1) if single else x_t.reshape(x_t.shape[0], -1)
    h = den.h_activation_batch(flat, t)
    return h[0] if single else h


def _resample(states: np.ndarray, t_start: int, den: Denoiser,
              sched: NoiseSchedule, steps: int, h_shift=None,
              shift_below: int | None = None) -> np.ndarray:
    """Walk a batch of states from t_start down to 0 along the sub-sequence,
    optionally shifting the bottleneck at every step with t <= shift_below."""
    taus = ddim_taus(sched, steps)
    below = taus[taus <= t_start][::-1]
    x = np.atleast_2d(states)
    for i in range(len(below) - 1):
        t_from, t_to = int(below[i]), int(below[i + 1])
        shift = None
        if h_shift is not None and (shift_below is None or t_from <= shift_below):
            shift = h_shift
        x = _move(x, t_from, t_to, den, sched, h_shift=shift)
    return x


def reconstruct(traj: DdimTrajectory, den: Denoiser, sched: NoiseSchedule,
                steps: int = 50, from_t: int | None = None) -> np.ndarray:
    """Sample the stored trajectory back to an image (no edits)."""
    t0 = int(traj.step_indices[-1]) if from_t is None else from_t
    x = _resample(traj.state_at(t0), t0, den, sched, steps)
    return state_to_image(x[0], traj.image_shape)


def edited_sample(x0, direction_vector: np.ndarray, space_tag: str, alpha: float,
                  mix: MixingConfig, den: Denoiser, sched: NoiseSchedule,
                  steps: int = 50, traj: DdimTrajectory | None = None) -> np.ndarray:
    """Invert to the mixing step, inject the scaled direction, and continue
    deterministic DDIM to t=0.

    h-space target: alpha*n is added to the bottleneck at every denoiser call
    with t <= t_mix.  input-space target: the state itself is shifted once at
    the mixing step.  alpha=0 reproduces the plain reconstruction bitwise.
    """
    t_mix = snap_to_tau(sched, steps, mix.t_mix)
    if traj is None:
        if x0 is None:
            raise ValueError("need an input image or a stored trajectory")
        traj = ddim_invert(np.asarray(x0), den, sched, steps)
    state = traj.state_at(t_mix).copy()

    vec = np.asarray(direction_vector, dtype=np.float64)
    if mix.target == "h-space":
        if space_tag != "h-analog" or len(vec) != den.h_width:
            raise ValueError("direction/space mismatch")
        x = _resample(state, t_mix, den, sched, steps,
                      h_shift=alpha * vec, shift_below=t_mix)
    else:
        if space_tag != "xt-analog" or len(vec) != state.size:
            raise ValueError("direction/space mismatch")
        x = _resample(state + alpha * vec, t_mix, den, sched, steps)
    return state_to_image(x[0], traj.image_shape)


def edited_samples_batch(traj: DdimTrajectory, direction_vector: np.ndarray,
                         space_tag: str, alphas, mix: MixingConfig, den: Denoiser,
                         sched: NoiseSchedule, steps: int = 50) -> list:
    """Render many edit strengths of one trajectory in a single batched walk."""
    t_mix = snap_to_tau(sched, steps, mix.t_mix)
    alphas = np.asarray(alphas, dtype=np.float64)
    state = traj.state_at(t_mix)
    vec = np.asarray(direction_vector, dtype=np.float64)
    if mix.target == "h-space":
        if space_tag != "h-analog" or len(vec) != den.h_width:
            raise ValueError("direction/space mismatch")
        stack = np.repeat(state[None, :], len(alphas), axis=0)
        shift = alphas[:, None] * vec[None, :]
        x = _resample(stack, t_mix, den, sched, steps, h_shift=shift,
                      shift_below=t_mix)
    else:
        if space_tag != "xt-analog" or len(vec) != state.size:
            raise ValueError("direction/space mismatch")
        stack = state[None, :] + alphas[:, None] * vec[None, :]
        x = _resample(stack, t_mix, den, sched, steps)
    return [state_to_image(row, traj.image_shape) for row in x]
