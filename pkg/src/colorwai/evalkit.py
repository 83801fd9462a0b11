"""Stage 4 evaluation: edit-strength search under an SSIM budget, pseudo and
relaxed accuracy, confusion matrices, and representation analysis."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from colorwai import colorlab
from colorwai.colorlab import AnnotationConfig, ColorCodebook
from colorwai.disentangle import DirectionSet, DirectionSpec
from colorwai.numerics import SsimConfig, ssim

# Count of alpha-star picks whose final SSIM check failed (must stay zero;
# the search only returns grid points that passed the threshold).
SSIM_GUARANTEE = {"checked": 0, "violations": 0}


def reset_ssim_guarantee() -> None:
    SSIM_GUARANTEE.update(checked=0, violations=0)


@dataclass
class EvalConfig:
    ssim_ratio: float = 0.75
    alpha_max: float = 3.0
    alpha_step: float = 0.05
    n_alpha_samples: int = 32
    m_eval_samples: int = 100
    seed: int = 0
    ssim: SsimConfig = field(default_factory=SsimConfig)
    annotation: AnnotationConfig = field(default_factory=AnnotationConfig)

    def __post_init__(self):
        if not 0.0 < self.ssim_ratio <= 1.0:
            raise ValueError("ssim_ratio must lie in (0,1]")
        if self.alpha_step <= 0:
            raise ValueError("alpha grid step must be positive")

    def alpha_grid(self) -> np.ndarray:
        return np.arange(self.alpha_step, self.alpha_max + 1e-9, self.alpha_step)


@dataclass
class EvalRow:
    color_id: int
    alpha_optimal: float
    p_acc: float
    relaxed_acc: float | None
    n_used: int
    note: str = ""


@dataclass
class EvalReport:
    backend_id: str
    method: str
    rows: list
    confusion: np.ndarray
    p_acc_mean: float
    p_acc_std: float
    relaxed_mean: float
    relaxed_std: float
    config: EvalConfig

    def to_document(self) -> dict:
        return {
            "version": 1,
            "backend": self.backend_id,
            "method": self.method,
            "rows": [
                {
                    "color_id": r.color_id,
                    "alpha_optimal": r.alpha_optimal,
                    "p_acc": r.p_acc,
                    "relaxed_acc": r.relaxed_acc,
                    "n_used": r.n_used,
                    "note": r.note,
                }
                for r in self.rows
            ],
            "aggregates": {
                "p_acc_mean": self.p_acc_mean,
                "p_acc_std": self.p_acc_std,
                "relaxed_mean": self.relaxed_mean,
                "relaxed_std": self.relaxed_std,
            },
            "confusion": self.confusion.tolist(),
            "config": {
                "ssim_ratio": self.config.ssim_ratio,
                "alpha_max": self.config.alpha_max,
                "alpha_step": self.config.alpha_step,
                "n_alpha_samples": self.config.n_alpha_samples,
                "m_eval_samples": self.config.m_eval_samples,
                "seed": self.config.seed,
            },
        }

    def write_csv(self, rows_path, confusion_path) -> None:
        with open(rows_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["color_id", "alpha_optimal", "p_acc", "relaxed_acc", "n_used", "note"])
            for r in self.rows:
                w.writerow([r.color_id, r.alpha_optimal, r.p_acc,
                            "" if r.relaxed_acc is None else r.relaxed_acc,
                            r.n_used, r.note])
        with open(confusion_path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.confusion.tolist())


@dataclass
class RepresentationReport:
    color_ids: list
    cosine: np.ndarray
    overlap: np.ndarray
    support_sizes: np.ndarray

    def to_document(self) -> dict:
        return {
            "version": 1,
            "color_ids": list(map(int, self.color_ids)),
            "cosine": self.cosine.tolist(),
            "overlap": self.overlap.tolist(),
            "support_sizes": self.support_sizes.tolist(),
        }

    def write_csv(self, cosine_path, overlap_path) -> None:
        with open(cosine_path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.cosine.tolist())
        with open(overlap_path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.overlap.tolist())


# ---------------------------------------------------------------------------
# Alpha search (Eq. "largest edit keeping 0.75 of self-SSIM")
# ---------------------------------------------------------------------------

def find_alpha_star(backend, ref, direction: DirectionSpec, cfg: EvalConfig) -> float:
    """Largest grid alpha whose edited render keeps SSIM >= ratio x self-SSIM.

    Profiles need not be monotone, so the grid is scanned from the top; 0 if
    even the smallest step breaks the budget.
    """
    base = backend.render(ref)
    threshold = cfg.ssim_ratio * ssim(base, base, cfg.ssim)
    grid = cfg.alpha_grid()[::-1]
    images = backend.render_edits(ref, direction, grid)
    for alpha, img in zip(grid, images):
        value = ssim(base, img, cfg.ssim)
        if value >= threshold:
            SSIM_GUARANTEE["checked"] += 1
            assert value >= cfg.ssim_ratio - 1e-12, "alpha-star SSIM guarantee broken"
            if value < cfg.ssim_ratio - 1e-12:
                SSIM_GUARANTEE["violations"] += 1
            return float(alpha)
    return 0.0


def _alpha_pool(cfg: EvalConfig) -> list:
    return [cfg.seed + i for i in range(cfg.n_alpha_samples)]


def _eval_pool(cfg: EvalConfig) -> list:
    # separate seed block so the alpha-search latents stay out of the metric
    return [cfg.seed + 100_000 + i for i in range(cfg.m_eval_samples)]


def alpha_optimal(backend, direction: DirectionSpec, cfg: EvalConfig) -> float:
    """Mean alpha-star over the seeded sample pool; stored on the direction."""
    if cfg.n_alpha_samples < 1:
        raise ValueError("need at least one alpha sample")
    stars = [
        find_alpha_star(backend, backend.sample_ref(s), direction, cfg)
        for s in _alpha_pool(cfg)
    ]
    value = float(np.mean(stars))
    direction.alpha_optimal = value
    return value


# ---------------------------------------------------------------------------
# Accuracy metrics
# ---------------------------------------------------------------------------

def relaxed_sample_score(hue: float, ranges) -> float:
    """1 inside the target hue range, else max(0, 1 - d/100) with d the
    circular distance in degrees to the nearest range border."""
    if colorlab.hue_in_ranges(hue, ranges):
        return 1.0
    d = colorlab.hue_distance_to_ranges(hue, ranges)
    return max(0.0, 1.0 - abs(d) / 100.0)


def _eligible_refs(backend, book: ColorCodebook, color_id: int, cfg: EvalConfig):
    refs = []
    for s in _eval_pool(cfg):
        ref = backend.sample_ref(s)
        if colorlab.annotate_main_color(backend.render(ref), book, cfg.annotation) != color_id:
            refs.append(ref)
    return refs


def _require_alpha(direction: DirectionSpec) -> float:
    if direction.alpha_optimal is None:
        raise ValueError("alpha_optimal not set; run alpha_optimal first")
    return float(direction.alpha_optimal)


def pseudo_accuracy(backend, book: ColorCodebook, direction: DirectionSpec,
                    cfg: EvalConfig) -> tuple[float, int]:
    """Fraction of eligible samples whose edited render annotates exactly as
    the target color.  Samples already in the target color are removed."""
    alpha = _require_alpha(direction)
    refs = _eligible_refs(backend, book, direction.color_id, cfg)
    if not refs:
        raise ValueError("no eligible samples")
    hits = 0
    for ref in refs:
        edited = backend.render_edit(ref, direction, alpha)
        if colorlab.annotate_main_color(edited, book, cfg.annotation) == direction.color_id:
            hits += 1
    return hits / len(refs), len(refs)


def relaxed_accuracy(backend, book: ColorCodebook, direction: DirectionSpec,
                     cfg: EvalConfig) -> tuple[float, int]:
    """Hue-tolerant accuracy: full credit inside the target's hue range,
    linear falloff (per 100 degrees) outside."""
    alpha = _require_alpha(direction)
    ranges = colorlab.hue_range(book, direction.color_id)
    if not ranges:
        raise ValueError("relaxed metric undefined for achromatic color")
    refs = _eligible_refs(backend, book, direction.color_id, cfg)
    if not refs:
        raise ValueError("no eligible samples")
    scores = []
    for ref in refs:
        edited = backend.render_edit(ref, direction, alpha)
        palette = colorlab.extract_palette(edited, cfg.annotation)
        hue = colorlab.lab_to_hsv(palette.first).h
        scores.append(relaxed_sample_score(hue, ranges))
    return float(np.mean(scores)), len(refs)


def confusion_matrix(backend, book: ColorCodebook, dirset: DirectionSet,
                     cfg: EvalConfig) -> np.ndarray:
    """Entry (i, j): samples edited toward color i that end up annotated j."""
    k = len(book)
    matrix = np.zeros((k, k), dtype=np.int64)
    for color_id, direction in sorted(dirset.directions.items()):
        alpha = _require_alpha(direction)
        for ref in _eligible_refs(backend, book, color_id, cfg):
            edited = backend.render_edit(ref, direction, alpha)
            achieved = colorlab.annotate_main_color(edited, book, cfg.annotation)
            matrix[color_id, achieved] += 1
    return matrix


def representation_report(dirset: DirectionSet) -> RepresentationReport:
    """Mutual cosines of the direction vectors, pairwise support overlaps,
    and support sizes."""
    ids = sorted(dirset.directions)
    if not ids:
        raise ValueError("empty direction set")
    dims = {len(dirset.directions[i].vector) for i in ids}
    tags = {dirset.directions[i].space_tag for i in ids}
    if len(dims) != 1 or len(tags) != 1:
        raise ValueError("directions span mixed spaces")
    vectors = np.stack([dirset.directions[i].vector for i in ids])
    supports = np.stack([dirset.directions[i].support for i in ids])
    cosine = vectors @ vectors.T
    overlap = (supports[:, None, :] & supports[None, :, :]).sum(axis=2)
    return RepresentationReport(
        color_ids=ids,
        cosine=cosine,
        overlap=overlap.astype(np.int64),
        support_sizes=supports.sum(axis=1).astype(np.int64),
    )


# ---------------------------------------------------------------------------
# Full evaluation run
# ---------------------------------------------------------------------------

def evaluate(backend, book: ColorCodebook, dirset: DirectionSet,
             cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Alpha-optimal search plus both accuracies and the confusion matrix in
    one pass, sharing renders between the metrics."""
    k = len(book)
    confusion = np.zeros((k, k), dtype=np.int64)
    rows = []
    base_ids = {}
    for s in _eval_pool(cfg):
        ref = backend.sample_ref(s)
        base_ids[s] = colorlab.annotate_main_color(backend.render(ref), book, cfg.annotation)

    for color_id in sorted(dirset.directions):
        direction = dirset.directions[color_id]
        alpha = alpha_optimal(backend, direction, cfg)
        ranges = colorlab.hue_range(book, color_id)
        note = ""
        hits, scores, used = 0, [], 0
        for s in _eval_pool(cfg):
            if base_ids[s] == color_id:
                continue
            used += 1
            ref = backend.sample_ref(s)
            edited = backend.render_edit(ref, direction, alpha)
            palette = colorlab.extract_palette(edited, cfg.annotation)
            achieved = colorlab.quantize_color(colorlab.lab_to_hsv(palette.first),
                                               book, cfg.annotation)
            confusion[color_id, achieved] += 1
            if achieved == color_id:
                hits += 1
            if ranges:
                hue = colorlab.lab_to_hsv(palette.first).h
                scores.append(relaxed_sample_score(hue, ranges))
        if used == 0:
            rows.append(EvalRow(color_id, alpha, 0.0, None, 0, note="no eligible samples"))
            continue
        relaxed = float(np.mean(scores)) if ranges else None
        if not ranges:
            note = "relaxed metric undefined for achromatic color"
        rows.append(EvalRow(color_id, alpha, hits / used, relaxed, used, note))

    p_accs = [r.p_acc for r in rows if r.n_used > 0]
    relaxeds = [r.relaxed_acc for r in rows if r.relaxed_acc is not None]
    return EvalReport(
        backend_id=backend.backend_id,
        method=dirset.method,
        rows=rows,
        confusion=confusion,
        p_acc_mean=float(np.mean(p_accs)) if p_accs else 0.0,
        p_acc_std=float(np.std(p_accs)) if p_accs else 0.0,
        relaxed_mean=float(np.mean(relaxeds)) if relaxeds else 0.0,
        relaxed_std=float(np.std(relaxeds)) if relaxeds else 0.0,
        config=cfg,
    )
