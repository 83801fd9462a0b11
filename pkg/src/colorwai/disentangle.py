"""Pipeline stages 1-3: couple latent codes with color annotations, fit one
direction per codebook color with three interchangeable methods, and edit
latents along fitted directions.

Methods
-------
interfacegan   unit normal of a linear classifier's separating hyperplane
               (full support).
stylespace     standardized deviation of the class mean from the population
               mean, restricted to the top-k deviating dimensions.
shapleyvec     classifier direction refit on the minimal dimension prefix
               whose Shapley importance mass reaches the explanation
               threshold E; everything outside the prefix is masked to zero.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from colorwai import numerics
from colorwai.colorlab import AnnotationConfig, ColorCodebook
from colorwai.numerics import LabeledLatentSet, train_linear_classifier
from colorwai.texgen import LatentCode

DIRECTION_SET_VERSION = 1


@dataclass
class LatentDataset:
    codes: np.ndarray
    color_ids: np.ndarray
    space_tag: str
    backend_id: str
    codebook_version: int

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.color_ids = np.asarray(self.color_ids, dtype=np.int64)
        if len(self.codes) != len(self.color_ids):
            raise ValueError("one color id per latent code required")

    @property
    def n(self) -> int:
        return len(self.codes)

    @property
    def dim(self) -> int:
        return self.codes.shape[1]

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.codes.tobytes())
        digest.update(self.color_ids.tobytes())
        digest.update(self.space_tag.encode())
        digest.update(self.backend_id.encode())
        return digest.hexdigest()[:16]

    def labels_for(self, color_id: int) -> np.ndarray:
        return self.color_ids == color_id

    def class_counts(self) -> dict:
        ids, counts = np.unique(self.color_ids, return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))


@dataclass
class DirectionSpec:
    method: str
    color_id: int
    vector: np.ndarray
    support: np.ndarray
    hyperparams: dict
    space_tag: str
    alpha_optimal: float | None = None
    seed: int = 0
    dataset_hash: str = ""

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        self.support = np.asarray(self.support, dtype=bool)
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit length, got {norm}")
        if np.any(self.vector[~self.support] != 0.0):
            raise ValueError("direction has mass outside its support")

    @property
    def support_size(self) -> int:
        return int(self.support.sum())

    def to_document(self) -> dict:
        return {
            "color_id": int(self.color_id),
            "vector": self.vector.tolist(),
            "support": self.support.astype(int).tolist(),
            "hyperparams": self.hyperparams,
            "alpha_optimal": self.alpha_optimal,
            "seed": self.seed,
            "dataset_hash": self.dataset_hash,
        }

    @classmethod
    def from_document(cls, doc: dict, method: str, space_tag: str) -> "DirectionSpec":
        return cls(
            method=method,
            color_id=int(doc["color_id"]),
            vector=np.asarray(doc["vector"], dtype=np.float64),
            support=np.asarray(doc["support"], dtype=bool),
            hyperparams=dict(doc["hyperparams"]),
            space_tag=space_tag,
            alpha_optimal=doc.get("alpha_optimal"),
            seed=int(doc.get("seed", 0)),
            dataset_hash=doc.get("dataset_hash", ""),
        )


@dataclass
class DirectionSet:
    backend_id: str
    space_tag: str
    method: str
    codebook_version: int
    directions: dict = field(default_factory=dict)
    partial: list = field(default_factory=list)  # (color_id, reason)
    version: int = DIRECTION_SET_VERSION

    def get(self, color_id: int) -> DirectionSpec:
        if color_id not in self.directions:
            raise KeyError(f"no direction fitted for color {color_id}")
        return self.directions[color_id]

    @property
    def is_partial(self) -> bool:
        return bool(self.partial)

    def to_document(self) -> dict:
        return {
            "version": self.version,
            "backend": self.backend_id,
            "space_tag": self.space_tag,
            "codebook_version": self.codebook_version,
            "method": self.method,
            "partial": [[int(c), r] for c, r in self.partial],
            "directions": [
                self.directions[c].to_document() for c in sorted(self.directions)
            ],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "DirectionSet":
        ds = cls(
            backend_id=doc["backend"],
            space_tag=doc["space_tag"],
            method=doc["method"],
            codebook_version=int(doc["codebook_version"]),
            partial=[(int(c), r) for c, r in doc.get("partial", [])],
            version=int(doc.get("version", 1)),
        )
        for entry in doc["directions"]:
            spec = DirectionSpec.from_document(entry, doc["method"], doc["space_tag"])
            ds.directions[spec.color_id] = spec
        return ds


@dataclass
class FitConfig:
    method: str = "shapleyvec"
    kind: str = "logistic"
    c_reg: float = 0.1
    k: int = 40
    explanation: float = 0.5
    seed: int = 0


# ---------------------------------------------------------------------------
# Stage 1: coupling
# ---------------------------------------------------------------------------

def couple(backend, book: ColorCodebook, n: int = 1000, seed: int = 0,
           cfg: AnnotationConfig = AnnotationConfig()) -> LatentDataset:
    """Pair n latent codes with the annotated color of their renders.

    The backend abstracts the two coupling paths: sampled latents for the
    texture generator, inverted mixing-step activations for diffusion.
    """
    codes, ids = backend.couple_rows(book, n, seed, cfg)
    return LatentDataset(
        codes=codes,
        color_ids=ids,
        space_tag=backend.space_tag,
        backend_id=backend.backend_id,
        codebook_version=book.version,
    )


# ---------------------------------------------------------------------------
# Stage 2: direction fitting
# ---------------------------------------------------------------------------

def _oriented_unit(vector: np.ndarray, data: LatentDataset, color_id: int) -> np.ndarray:
    """Unit-normalize and point toward the positive class."""
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ValueError("degenerate zero direction")
    unit = vector / norm
    labels = data.labels_for(color_id)
    pos_mean = data.codes[labels].mean(axis=0)
    neg_mean = data.codes[~labels].mean(axis=0)
    if float((pos_mean - neg_mean) @ unit) < 0:
        unit = -unit
    return unit


def fit_interfacegan(data: LatentDataset, color_id: int, kind: str = "logistic",
                     c_reg: float = 0.1, seed: int = 0) -> DirectionSpec:
    """Direction = unit normal of the one-vs-rest separating hyperplane."""
    labeled = LabeledLatentSet(data.codes, data.labels_for(color_id), data.space_tag)
    clf = train_linear_classifier(labeled, kind=kind, c_reg=c_reg, seed=seed)
    vector = _oriented_unit(clf.weights, data, color_id)
    return DirectionSpec(
        method="interfacegan", color_id=color_id, vector=vector,
        support=np.ones(data.dim, dtype=bool),
        hyperparams={"kind": kind, "c_reg": c_reg},
        space_tag=data.space_tag, seed=seed, dataset_hash=data.content_hash(),
    )


def fit_stylespace(data: LatentDataset, color_id: int, k: int = 40) -> DirectionSpec:
    """Direction = class-mean deviation on the k most deviating dimensions.

    Deviation is standardized by the population std; zero-variance dimensions
    are excluded (with a warning) and the next best dimension is promoted.
    """
    labels = data.labels_for(color_id)
    if not labels.any() or labels.all():
        raise ValueError("degenerate labels")
    mean_all = data.codes.mean(axis=0)
    mean_c = data.codes[labels].mean(axis=0)
    std = data.codes.std(axis=0)
    deviation = mean_c - mean_all

    score = np.abs(deviation)
    dead = std == 0.0
    if dead.any():
        warnings.warn(f"excluding {int(dead.sum())} zero-variance dimensions")
        score = np.where(dead, -np.inf, score / np.where(dead, 1.0, std))
    else:
        score = score / std

    k_eff = min(k, int(np.isfinite(score).sum()))
    order = np.argsort(-score, kind="stable")[:k_eff]
    support = np.zeros(data.dim, dtype=bool)
    support[order] = True
    vector = np.where(support, deviation, 0.0)
    vector = _oriented_unit(vector, data, color_id)
    vector = np.where(support, vector, 0.0)  # exact zeros off-support
    return DirectionSpec(
        method="stylespace", color_id=color_id, vector=vector, support=support,
        hyperparams={"k": k}, space_tag=data.space_tag,
        dataset_hash=data.content_hash(),
    )


def shapley_support(importance: np.ndarray, explanation: float) -> np.ndarray:
    """Minimal prefix of descending importances whose mass reaches E."""
    if not 0.0 < explanation < 1.0:
        raise ValueError("explanation threshold must lie in (0,1)")
    order = np.argsort(-importance, kind="stable")
    cum = np.cumsum(importance[order])
    size = int(np.searchsorted(cum, explanation - 1e-12) + 1)
    size = min(size, len(importance))
    support = np.zeros(len(importance), dtype=bool)
    support[order[:size]] = True
    return support


def fit_shapleyvec(data: LatentDataset, color_id: int, explanation: float = 0.5,
                   kind: str = "logistic", c_reg: float = 0.1,
                   seed: int = 0) -> DirectionSpec:
    """Two-stage fit: rank dimensions by Shapley importance of a first
    classifier, keep the minimal prefix reaching the explanation mass, then
    refit on codes with everything else masked to zero."""
    labels = data.labels_for(color_id)
    labeled = LabeledLatentSet(data.codes, labels, data.space_tag)
    stage1 = train_linear_classifier(labeled, kind=kind, c_reg=c_reg, seed=seed)

    # importance over the full dataset: the ranking stays stable even when
    # the positive class is small
    importance = numerics.mean_abs_importance(stage1, labeled)
    support = shapley_support(importance, explanation)
    if not support.any():
        raise ValueError("support collapsed to zero dimensions")

    masked = np.where(support, data.codes, 0.0)
    stage2 = train_linear_classifier(
        LabeledLatentSet(masked, labels, data.space_tag),
        kind=kind, c_reg=c_reg, seed=seed,
    )
    vector = np.where(support, stage2.weights, 0.0)
    vector = _oriented_unit(vector, data, color_id)
    vector = np.where(support, vector, 0.0)
    return DirectionSpec(
        method="shapleyvec", color_id=color_id, vector=vector, support=support,
        hyperparams={"E": explanation, "kind": kind, "c_reg": c_reg},
        space_tag=data.space_tag, seed=seed, dataset_hash=data.content_hash(),
    )


def fit_direction(data: LatentDataset, color_id: int, cfg: FitConfig) -> DirectionSpec:
    if cfg.method == "interfacegan":
        return fit_interfacegan(data, color_id, cfg.kind, cfg.c_reg, cfg.seed)
    if cfg.method == "stylespace":
        return fit_stylespace(data, color_id, cfg.k)
    if cfg.method == "shapleyvec":
        return fit_shapleyvec(data, color_id, cfg.explanation, cfg.kind,
                              cfg.c_reg, cfg.seed)
    raise ValueError(f"unknown method {cfg.method!r}")


def fit_all(data: LatentDataset, book: ColorCodebook, cfg: FitConfig) -> DirectionSet:
    """One direction per codebook color; colors without both classes are
    recorded as partial instead of failing the whole set."""
    ds = DirectionSet(
        backend_id=data.backend_id, space_tag=data.space_tag,
        method=cfg.method, codebook_version=data.codebook_version,
    )
    for entry in book.entries:
        try:
            ds.directions[entry.id] = fit_direction(data, entry.id, cfg)
        except ValueError as exc:
            ds.partial.append((entry.id, str(exc)))
    return ds


# ---------------------------------------------------------------------------
# Stage 3: latent edits
# ---------------------------------------------------------------------------

def edit_latent(z, direction: DirectionSpec, alpha: float):
    """Return z + alpha * direction (the input is never mutated)."""
    if isinstance(z, LatentCode):
        if z.space_tag != direction.space_tag:
            raise ValueError(
                f"direction/space mismatch: {z.space_tag} vs {direction.space_tag}")
        if z.dim != len(direction.vector):
            raise ValueError("dimension mismatch")
        return LatentCode(coords=z.coords + alpha * direction.vector,
                          space_tag=z.space_tag)
    arr = np.asarray(z, dtype=np.float64)
    if arr.shape[-1] != len(direction.vector):
        raise ValueError("dimension mismatch")
    return arr + alpha * direction.vector
