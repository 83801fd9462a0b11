"""Procedural textile generator with an entangling fixed nonlinear mapping.

Plays the role of a style-based generator at desk scale: latents pass through
a frozen random two-layer tanh network to pattern parameters (so no latent
coordinate controls any single visual factor), and a deterministic renderer
turns parameters into a motif image.  The mean-color finite-difference
gradient provides a ground-truth direction oracle for the fitted ones.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from colorwai import colorlab
from colorwai.colorlab import AnnotationConfig, ColorCodebook

DEFAULT_LATENT_DIM = 64
DEFAULT_RESOLUTION = 64
_HIDDEN = 32
_N_RAW = 13  # two for hue (angle encoding), then sat, val, offset, 4 motif
             # logits, frequency, rotation, phase, contrast

MOTIFS = ("stripes", "checks", "dots", "waves")


@dataclass(frozen=True)
class LatentCode:
    coords: np.ndarray
    space_tag: str = "w-analog"

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if not np.all(np.isfinite(coords)):
            raise ValueError("non-finite latent coordinates")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class PatternParams:
    base_hue: float
    base_sat: float
    base_val: float
    accent_hue_offset: float
    motif_weights: tuple
    frequency: float
    rotation: float
    phase: float
    contrast: float

    def __post_init__(self):
        w = np.asarray(self.motif_weights)
        if len(w) != 4 or np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("motif weights must be a 4-simplex point")
        if not (2.0 <= self.frequency <= 16.0):
            raise ValueError("frequency outside [2,16]")
        if not (0.0 <= self.phase < 1.0):
            raise ValueError("phase outside [0,1)")
        if not (0.0 <= self.contrast <= 1.0):
            raise ValueError("contrast outside [0,1]")


class ProceduralGenerator:
    """Immutable after construction; synthesis is a pure function."""

    def __init__(self, mapping_seed: int = 7, latent_dim: int = DEFAULT_LATENT_DIM,
                 resolution: int = DEFAULT_RESOLUTION):
        self.mapping_seed = int(mapping_seed)
        self.latent_dim = int(latent_dim)
        self.resolution = int(resolution)
        rng = np.random.default_rng(self.mapping_seed)
        d = self.latent_dim
        half_h = _HIDDEN // 2
        if d < 2 * half_h:
            raise ValueError(f"latent_dim must be at least {2 * half_h}")

        # Style-generator-like factor layout.  Each geometry hidden unit
        # reads its own pair of latent dims with strong weights, so motif
        # geometry gets its corpus diversity from a handful of dedicated
        # coordinates; the color hidden bank reads the upper latent range
        # densely, overlapping the last geometry pairs.  Color and geometry
        # stay entangled through the overlap, but a sparse color direction
        # can avoid the fragile geometry coordinates entirely.
        self._w1 = np.zeros((_HIDDEN, d))
        for k in range(half_h):
            self._w1[k, 2 * k: 2 * k + 2] = rng.standard_normal(2)
        # Color sub-banks read overlapping 16-dim windows sliding over the
        # upper half of the latent, so the color factors entangle with each
        # other (but not with the dedicated geometry coordinates).
        color_lo = 2 * half_h
        span = d - color_lo
        win = max(span // 2, 2)
        step = max((span - win) // 3, 1)
        for bank in range(4):
            lo = min(color_lo + bank * step, d - win)
            rows = slice(half_h + 4 * bank, half_h + 4 * bank + 4)
            self._w1[rows, lo:lo + win] = rng.standard_normal((4, win)) / math.sqrt(win / 2.0)
        self._b1 = 0.3 * rng.standard_normal(_HIDDEN)
        # zero bias on the hue sub-bank: tanh outputs stay symmetric, so the
        # angle encoding covers the wheel without a preferred direction
        self._b1[half_h:half_h + 4] = 0.0

        # Output rows 0-4 are color (hue pair, sat, val, accent offset), each
        # reading its own four color-bank units; rows 5-12 are geometry
        # (motif logits, frequency, rotation, phase, contrast), each from its
        # own hidden pair.  Narrow readouts keep every parameter responsive
        # to latent movement; entanglement comes from all color sub-banks
        # sharing the same dense latent band underneath.
        self._w2 = np.zeros((_N_RAW, _HIDDEN))
        self._w2[0, 16:20] = rng.standard_normal(4)
        self._w2[1, 16:20] = rng.standard_normal(4)
        self._w2[2, 20:24] = 0.45 * rng.standard_normal(4)  # saturation
        self._w2[3, 24:28] = 0.8 * rng.standard_normal(4)   # value
        self._w2[4, 28:32] = 1.25 * rng.standard_normal(4)  # accent offset
        motif_units = [0, 1, 2, 3, 12, 13, 14, 15]
        for row in range(5, 9):
            self._w2[row, motif_units] = 1.5 * rng.standard_normal(8) / math.sqrt(8)
        self._w2[9, 4:6] = 0.9 * rng.standard_normal(2)    # frequency
        self._w2[10, 6:8] = 0.9 * rng.standard_normal(2)   # rotation
        self._w2[11, 8:10] = 0.6 * rng.standard_normal(2)  # phase
        self._w2[12, 10:12] = 0.9 * rng.standard_normal(2)  # contrast
        self._b2 = 0.3 * rng.standard_normal(_N_RAW)
        # The hue pair feeds an angle encoding: orthonormal readout rows and
        # zero bias keep the angle distribution close to uniform.
        self._w2[0] /= np.linalg.norm(self._w2[0])
        self._w2[1] -= (self._w2[1] @ self._w2[0]) * self._w2[0]
        self._w2[1] /= np.linalg.norm(self._w2[1])
        self._b2[0] = self._b2[1] = 0.0
        self._w1.flags.writeable = False
        self._b1.flags.writeable = False
        self._w2.flags.writeable = False
        self._b2.flags.writeable = False
        self.space_tag = "w-analog"
        self.backend_id = "texgen"

    def to_document(self) -> dict:
        return {
            "mapping_seed": self.mapping_seed,
            "latent_dim": self.latent_dim,
            "resolution": self.resolution,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "ProceduralGenerator":
        return cls(doc["mapping_seed"], doc["latent_dim"], doc["resolution"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_document()))

    @classmethod
    def load(cls, path) -> "ProceduralGenerator":
        return cls.from_document(json.loads(Path(path).read_text()))


def sample_latent(gen: ProceduralGenerator, seed: int) -> LatentCode:
    rng = np.random.default_rng(seed)
    return LatentCode(coords=rng.standard_normal(gen.latent_dim))


def _unit_interval(raw: float) -> float:
    return 0.5 * (math.tanh(raw) + 1.0)


def map_latent(gen: ProceduralGenerator, z: LatentCode) -> PatternParams:
    """Frozen nonlinear mapping from latent coordinates to pattern parameters.

    Hue comes from an angle encoding (atan2 of two channels) so the color
    wheel is covered without a seam; everything else is squashed into its
    range with tanh, and motif weights are a softmax.
    """
    coords = z.coords
    if coords.shape != (gen.latent_dim,):
        raise ValueError(f"latent dim mismatch: {coords.shape} vs {gen.latent_dim}")
    h = np.tanh(gen._w1 @ coords + gen._b1)
    raw = gen._w2 @ h + gen._b2

    base_hue = math.degrees(math.atan2(raw[0], raw[1])) % 360.0
    base_sat = 0.3 + 0.65 * _unit_interval(raw[2])
    base_val = 0.3 + 0.6 * _unit_interval(raw[3])
    accent_offset = 180.0 * math.tanh(raw[4])
    logits = 2.0 * raw[5:9]
    logits = logits - logits.max()
    expw = np.exp(logits)
    motif_weights = tuple(float(x) for x in expw / expw.sum())
    frequency = 2.0 + 14.0 * _unit_interval(raw[9])
    rotation = 180.0 * _unit_interval(raw[10])
    phase = _unit_interval(raw[11])
    if phase >= 1.0:
        phase = 0.0
    contrast = _unit_interval(raw[12])
    return PatternParams(
        base_hue=base_hue, base_sat=base_sat, base_val=base_val,
        accent_hue_offset=accent_offset, motif_weights=motif_weights,
        frequency=frequency, rotation=rotation, phase=phase, contrast=contrast,
    )


def _motif_field(params: PatternParams, resolution: int) -> np.ndarray:
    """Blended scalar motif field over the pixel grid, in [0, 1]."""
    ax = (np.arange(resolution) + 0.5) / resolution
    u, v = np.meshgrid(ax, ax, indexing="xy")
    theta = math.radians(params.rotation)
    ur = math.cos(theta) * u + math.sin(theta) * v
    vr = -math.sin(theta) * u + math.cos(theta) * v
    f, ph = params.frequency, params.phase

    stripes = 0.5 + 0.5 * np.sin(2.0 * math.pi * (f * ur + ph))
    # smooth checkerboard: sharpened product of square-ish waves (keeps the
    # renderer differentiable in the latent, unlike floor parity)
    checks = 0.5 - 0.5 * (np.tanh(4.0 * np.sin(2.0 * math.pi * (f * ur + ph)))
                          * np.tanh(4.0 * np.sin(2.0 * math.pi * (f * vr + ph))))
    du = (f * ur + ph) % 1.0 - 0.5
    dv = (f * vr + ph) % 1.0 - 0.5
    r = np.sqrt(du * du + dv * dv)
    dots = np.clip(1.0 - (r / 0.35) ** 2, 0.0, 1.0)
    waves = 0.5 + 0.5 * np.sin(2.0 * math.pi * (f * ur + 0.25 * np.sin(2.0 * math.pi * vr) + ph))

    w = params.motif_weights
    return w[0] * stripes + w[1] * checks + w[2] * dots + w[3] * waves


def _blend_weight(m: np.ndarray, contrast: float) -> np.ndarray:
    """Accent blend factor in [0, contrast].

    Sharpened around 0.62 rather than the field midpoint: the accent region
    stays the minority of the area, so the dominant palette entry is always
    the base color no matter what the motif geometry does.  Contrast 0
    collapses the blend to the uniform base color.
    """
    sharp = 0.5 + 0.5 * np.tanh((m - 0.62) * (1.0 + 8.0 * contrast))
    return contrast * sharp


def synthesize(gen: ProceduralGenerator, z: LatentCode) -> np.ndarray:
    """Render the latent's pattern at gen.resolution as float RGB in [0,1]."""
    return render_params(map_latent(gen, z), gen.resolution)


def render_params(params: PatternParams, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Render explicit pattern parameters as a float RGB image.

    Pixels interpolate in HSV between the base color and the accent (base
    hue plus the offset, always darker so the luminance pattern keeps its
    polarity) by the blended motif field.
    """
    m = _motif_field(params, resolution)
    t = _blend_weight(m, params.contrast)
    arc = ((params.accent_hue_offset + 180.0) % 360.0) - 180.0
    hue = (params.base_hue + t * arc) % 360.0
    sat = np.full_like(t, params.base_sat)
    accent_val = 0.45 * params.base_val
    val = params.base_val + t * (accent_val - params.base_val)
    return colorlab.hsv_to_rgb_array(np.stack([hue, sat, val], axis=-1))


def mean_image_hsv(img: np.ndarray) -> np.ndarray:
    """HSV of the mean RGB of the image."""
    mean_rgb = np.asarray(img, dtype=np.float64).reshape(-1, 3).mean(axis=0)
    return colorlab.rgb_to_hsv_array(mean_rgb)


def oracle_color_gradient(gen: ProceduralGenerator, z: LatentCode, color_id: int,
                          book: ColorCodebook, step: float = 1e-3,
                          cfg: AnnotationConfig = AnnotationConfig()) -> np.ndarray:
    """Finite-difference ground-truth direction toward a codebook color.

    Central differences of -weighted_hsv_distance(mean image color, target)
    with respect to the latent, normalized to unit length.  Independent of
    every fitted direction; used only for verification.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    target = book.entry(color_id).hsv

    def score(coords: np.ndarray) -> float:
        img = synthesize(gen, LatentCode(coords=coords, space_tag=z.space_tag))
        hsv = mean_image_hsv(img)
        return -colorlab.weighted_hsv_distance((hsv[0], hsv[1], hsv[2]), target, cfg)

    grad = np.zeros(gen.latent_dim)
    base = z.coords
    for i in range(gen.latent_dim):
        e = np.zeros(gen.latent_dim)
        e[i] = step
        grad[i] = (score(base + e) - score(base - e)) / (2.0 * step)
    norm = float(np.linalg.norm(grad))
    if norm < 1e-12:
        raise ValueError("flat oracle at this point")
    return grad / norm


# ---------------------------------------------------------------------------
# Corpus export
# ---------------------------------------------------------------------------

def export_corpus(gen: ProceduralGenerator, n: int, seed: int, out_dir,
                  book: ColorCodebook | None = None,
                  cfg: AnnotationConfig = AnnotationConfig()) -> Path:
    """Render ``n`` seeded samples as PNGs plus a manifest CSV.

    Sample i uses latent seed ``seed + i``.  The color column is -1 until a
    codebook exists; ``annotate_corpus`` fills it in afterwards.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        latent_seed = seed + i
        z = sample_latent(gen, latent_seed)
        img = synthesize(gen, z)
        fname = f"pattern_{i:05d}.png"
        colorlab.save_image_png(out / fname, img)
        color_id = -1
        if book is not None:
            color_id = colorlab.annotate_main_color(img, book, cfg)
        rows.append((fname, latent_seed, color_id))
    _write_manifest(out / "manifest.csv", rows)
    return out


def annotate_corpus(corpus_dir, book: ColorCodebook,
                    cfg: AnnotationConfig = AnnotationConfig()) -> int:
    """Fill the manifest's color column by annotating each PNG. Returns count."""
    corpus = Path(corpus_dir)
    rows = read_manifest(corpus / "manifest.csv")
    updated = []
    for fname, latent_seed, _ in rows:
        img = colorlab.load_image_png(corpus / fname)
        updated.append((fname, latent_seed, colorlab.annotate_main_color(img, book, cfg)))
    _write_manifest(corpus / "manifest.csv", updated)
    return len(updated)


def _write_manifest(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "seed", "color_id"])
        writer.writerows(rows)


def read_manifest(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(fname, int(seed), int(color_id)) for fname, seed, color_id in reader]
