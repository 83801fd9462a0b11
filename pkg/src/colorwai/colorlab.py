"""Color encodings, perceptual distances, palette extraction, codebook
construction, and predominant-color annotation.

All image math happens on float arrays in [0, 1]; conversion to 8-bit only at
the PNG boundary (round half up).  Palette extraction runs leader-follower
adaptive clustering in CIELab, which keeps small contrasting color islands
that k-means style quantizers average away.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from colorwai._kernels import leader_follower_cluster

# Saturation below which a color is treated as achromatic: hue is meaningless
# near the gray axis, so such colors compete on (s, v) terms only.
ACHROMATIC_SAT = 0.1

# Leader-follower defaults (CIE76 Lab units): spawn a new cluster past 20,
# merge centroids closer than 10.
DEFAULT_SPAWN_DELTA_E = 20.0
MERGE_FRACTION = 0.5

CODEBOOK_VERSION = 1

# sRGB -> XYZ, D65 (Lindbloom).  The white point is taken as the matrix row
# sums so that rgb(1,1,1) maps to exactly L=100, a=0, b=0.
_M_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_M_XYZ_TO_RGB = np.linalg.inv(_M_RGB_TO_XYZ)
_WHITE = _M_RGB_TO_XYZ.sum(axis=1)

_LAB_EPS = (6.0 / 29.0) ** 3
_LAB_KAPPA = (29.0 / 6.0) ** 2 / 3.0  # slope of f below the cube-root knee


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RgbColor:
    r: float
    g: float
    b: float

    def __post_init__(self):
        for name in ("r", "g", "b"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"rgb channel {name}={v} outside [0,1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b])


@dataclass(frozen=True)
class HsvColor:
    h: float
    s: float
    v: float

    def __post_init__(self):
        object.__setattr__(self, "h", float(self.h) % 360.0)
        if not (0.0 <= self.s <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ValueError(f"hsv s/v outside [0,1]: s={self.s} v={self.v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.s, self.v])


@dataclass(frozen=True)
class LabColor:
    l: float
    a: float
    b: float

    def __post_init__(self):
        if not (-1e-6 <= self.l <= 100.0 + 1e-6):
            raise ValueError(f"lab lightness {self.l} outside [0,100]")

    def as_array(self) -> np.ndarray:
        return np.array([self.l, self.a, self.b])


@dataclass(frozen=True)
class Palette:
    """Ordered (color, pixel share) pairs, heaviest first."""

    entries: tuple

    def __post_init__(self):
        shares = [s for _, s in self.entries]
        if any(shares[i] < shares[i + 1] for i in range(len(shares) - 1)):
            raise ValueError("palette shares must be nonincreasing")
        if sum(shares) > 1.0 + 1e-6:
            raise ValueError("palette shares sum above 1")

    @property
    def first(self) -> LabColor:
        return self.entries[0][0]


@dataclass(frozen=True)
class CodebookEntry:
    id: int
    name: str
    lab: LabColor
    hsv: HsvColor


@dataclass(frozen=True)
class ColorCodebook:
    entries: tuple
    version: int = CODEBOOK_VERSION

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if ids != list(range(len(ids))):
            raise ValueError("codebook ids must be dense 0..K-1")
        seen = set()
        for e in self.entries:
            key = (e.hsv.h, e.hsv.s, e.hsv.v)
            if key in seen:
                raise ValueError("duplicate HSV entry in codebook")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, color_id: int) -> CodebookEntry:
        if not 0 <= color_id < len(self.entries):
            raise ValueError(f"invalid codebook color id {color_id}")
        return self.entries[color_id]

    def to_document(self) -> dict:
        return {
            "version": self.version,
            "K": len(self.entries),
            "entries": [
                {
                    "id": e.id,
                    "name": e.name,
                    "lab": [e.lab.l, e.lab.a, e.lab.b],
                    "hsv": [e.hsv.h, e.hsv.s, e.hsv.v],
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "ColorCodebook":
        entries = tuple(
            CodebookEntry(
                id=int(e["id"]),
                name=e["name"],
                lab=LabColor(*e["lab"]),
                hsv=HsvColor(*e["hsv"]),
            )
            for e in doc["entries"]
        )
        return cls(entries=entries, version=int(doc.get("version", 1)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_document(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ColorCodebook":
        with open(path) as fh:
            return cls.from_document(json.load(fh))


@dataclass(frozen=True)
class AnnotationConfig:
    hue_weight: float = 0.8
    sat_weight: float = 0.1
    val_weight: float = 0.1
    palette_spawn_threshold: float = DEFAULT_SPAWN_DELTA_E
    palette_max_colors: int = 6

    def __post_init__(self):
        total = self.hue_weight + self.sat_weight + self.val_weight
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"annotation weights sum to {total}, expected 1")
        if min(self.hue_weight, self.sat_weight, self.val_weight) < 0:
            raise ValueError("annotation weights must be nonnegative")
        if self.palette_spawn_threshold <= 0:
            raise ValueError("palette spawn threshold must be positive")


# ---------------------------------------------------------------------------
# Conversions (vectorized; scalar dataclass wrappers below)
# ---------------------------------------------------------------------------

def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """RGB [0,1] -> HSV with hue in degrees [0,360). Shape (..., 3)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe_c) % 6.0,
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h * 60.0, 0.0)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb_array(hsv: np.ndarray) -> np.ndarray:
    hsv = np.asarray(hsv, dtype=np.float64)
    h = (hsv[..., 0] % 360.0) / 60.0
    s, v = hsv[..., 1], hsv[..., 2]
    c = v * s
    x = c * (1.0 - np.abs(h % 2.0 - 1.0))
    m = v - c
    zeros = np.zeros_like(c)
    sector = np.floor(h).astype(int) % 6
    r = np.choose(sector, [c, x, zeros, zeros, x, c])
    g = np.choose(sector, [x, c, c, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, c, c, x])
    return np.stack([r + m, g + m, b + m], axis=-1)


def rgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """sRGB [0,1] -> CIELab (D65). Shape (..., 3)."""
    srgb = np.asarray(rgb, dtype=np.float64)
    linear = np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _M_RGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _LAB_EPS, np.cbrt(t), _LAB_KAPPA * t + 4.0 / 29.0)
    l = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([l, a, b], axis=-1)


def lab_to_rgb_array(lab: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CIELab -> sRGB, clamping out-of-gamut channels to [0,1].

    Returns (rgb, clamped) where ``clamped`` flags pixels that needed it.
    """
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f**3 > _LAB_EPS, f**3, (f - 4.0 / 29.0) / _LAB_KAPPA)
    xyz = t * _WHITE
    linear = xyz @ _M_XYZ_TO_RGB.T
    clamped_linear = np.clip(linear, 0.0, None)
    srgb = np.where(
        clamped_linear <= 0.0031308,
        12.92 * clamped_linear,
        1.055 * clamped_linear ** (1.0 / 2.4) - 0.055,
    )
    out = np.clip(srgb, 0.0, 1.0)
    clamped = np.any((linear < -1e-9) | (srgb > 1.0 + 1e-9), axis=-1)
    return out, clamped


def convert_rgb_hsv(c: RgbColor) -> HsvColor:
    h, s, v = rgb_to_hsv_array(c.as_array())
    return HsvColor(float(h), float(s), float(v))


def convert_hsv_rgb(c: HsvColor) -> RgbColor:
    r, g, b = hsv_to_rgb_array(c.as_array())
    return RgbColor(float(r), float(g), float(b))


def convert_rgb_lab(c: RgbColor) -> LabColor:
    l, a, b = rgb_to_lab_array(c.as_array())
    return LabColor(float(np.clip(l, 0.0, 100.0)), float(a), float(b))


def convert_lab_rgb(c: LabColor) -> tuple[RgbColor, bool]:
    rgb, clamped = lab_to_rgb_array(c.as_array())
    return RgbColor(*(float(x) for x in rgb)), bool(clamped)


def lab_to_hsv(c: LabColor) -> HsvColor:
    rgb, _ = convert_lab_rgb(c)
    return convert_rgb_hsv(rgb)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def hue_distance(h1: float, h2: float) -> float:
    """Circular hue distance in degrees, in [0, 180]."""
    d = abs((float(h1) - float(h2)) % 360.0)
    return min(d, 360.0 - d)


def weighted_hsv_distance(c1, c2, cfg: AnnotationConfig = AnnotationConfig(), *,
                          achromatic_rule: bool = False) -> float:
    """Hue-dominated HSV distance in [0, 1].

    With ``achromatic_rule`` the hue term is zeroed when either side is
    achromatic (s < 0.1): near the gray axis only the (s, v) terms compete.
    Quantization turns this on; the plain metric keeps the full formula.
    """
    h1, s1, v1 = (c1.h, c1.s, c1.v) if isinstance(c1, HsvColor) else c1
    h2, s2, v2 = (c2.h, c2.s, c2.v) if isinstance(c2, HsvColor) else c2
    if achromatic_rule and (s1 < ACHROMATIC_SAT or s2 < ACHROMATIC_SAT):
        hue_term = 0.0
    else:
        hue_term = hue_distance(h1, h2) / 180.0
    return (
        cfg.hue_weight * hue_term
        + cfg.sat_weight * abs(s1 - s2)
        + cfg.val_weight * abs(v1 - v2)
    )


def delta_e(lab1: LabColor, lab2: LabColor) -> float:
    """CIE76 color difference."""
    return float(np.linalg.norm(lab1.as_array() - lab2.as_array()))


# ---------------------------------------------------------------------------
# Palette extraction and codebook construction
# ---------------------------------------------------------------------------

def ensure_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[-1] != 3 or img.size == 0:
        raise ValueError("empty input")
    return img


def extract_palette(img: np.ndarray, cfg: AnnotationConfig = AnnotationConfig()) -> Palette:
    """Leader-follower adaptive clustering of pixels in Lab.

    A pixel joins its nearest cluster when within the spawn threshold,
    otherwise it founds a new one; centroids closer than half the threshold
    are merged afterwards.  Deterministic for a fixed pixel order.
    """
    img = ensure_image(img)
    pixels = rgb_to_lab_array(img).reshape(-1, 3)
    pixels = np.ascontiguousarray(pixels)
    weights = np.ones(len(pixels))
    spawn = cfg.palette_spawn_threshold
    centroids, cweights = leader_follower_cluster(pixels, weights, spawn, spawn * MERGE_FRACTION)
    order = np.argsort(-cweights, kind="stable")[: cfg.palette_max_colors]
    total = float(len(pixels))
    entries = tuple(
        (LabColor(*(float(x) for x in centroids[i])), float(cweights[i]) / total)
        for i in order
    )
    return Palette(entries=entries)


def _collect_weighted_colors(palettes) -> tuple[np.ndarray, np.ndarray]:
    rows, weights = [], []
    for p in palettes:
        for lab, share in p.entries:
            rows.append([lab.l, lab.a, lab.b])
            weights.append(share)
    return np.ascontiguousarray(rows, dtype=np.float64), np.asarray(weights, dtype=np.float64)


def _cluster_count(points, weights, spawn: float) -> tuple[np.ndarray, np.ndarray]:
    return leader_follower_cluster(points, weights, spawn, spawn * MERGE_FRACTION)


def _merge_down_to(centroids: np.ndarray, cweights: np.ndarray, k: int):
    cent = list(map(np.asarray, centroids))
    cw = list(map(float, cweights))
    while len(cent) > k:
        best = None
        for a in range(len(cent)):
            for b in range(a + 1, len(cent)):
                d2 = float(np.sum((cent[a] - cent[b]) ** 2))
                if best is None or d2 < best[0]:
                    best = (d2, a, b)
        _, a, b = best
        w = cw[a] + cw[b]
        cent[a] = cent[a] + (cent[b] - cent[a]) * (cw[b] / w)
        cw[a] = w
        del cent[b], cw[b]
    return np.array(cent), np.array(cw)


def build_codebook(palettes, k: int = 19) -> ColorCodebook:
    """Re-cluster all palette entries (share-weighted) into exactly ``k``
    predominant colors by bisecting the clustering threshold."""
    points, weights = _collect_weighted_colors(palettes)
    if len(np.unique(points, axis=0)) < k:
        raise ValueError("degenerate corpus")

    target = None
    lo = hi = DEFAULT_SPAWN_DELTA_E
    cent, cw = _cluster_count(points, weights, lo)
    if len(cent) == k:
        target = (cent, cw)
    elif len(cent) > k:
        # Too many clusters: raise the threshold until few enough.
        for _ in range(40):
            hi *= 2.0
            cent, cw = _cluster_count(points, weights, hi)
            if len(cent) == k:
                target = (cent, cw)
                break
            if len(cent) < k:
                break
    else:
        for _ in range(60):
            lo /= 2.0
            cent, cw = _cluster_count(points, weights, lo)
            if len(cent) == k:
                target = (cent, cw)
                break
            if len(cent) > k:
                break

    if target is None:
        best_above = None  # tightest clustering with count still > k
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            cent, cw = _cluster_count(points, weights, mid)
            if len(cent) == k:
                target = (cent, cw)
                break
            if len(cent) > k:
                lo = mid
                best_above = (cent, cw)
            else:
                hi = mid
        if target is None:
            # The count stepped over k between two adjacent thresholds; fuse
            # the closest centroid pairs of the finer clustering instead.
            if best_above is None:
                best_above = _cluster_count(points, weights, lo)
            target = _merge_down_to(best_above[0], best_above[1], k)

    centroids, cweights = target
    order = np.argsort(-np.asarray(cweights), kind="stable")
    entries = []
    used_names: dict[str, int] = {}
    for new_id, idx in enumerate(order):
        lab = LabColor(*(float(np.clip(centroids[idx][0], 0, 100)),
                         float(centroids[idx][1]), float(centroids[idx][2])))
        hsv = lab_to_hsv(lab)
        name = _bucket_name(lab, hsv)
        if name in used_names:
            used_names[name] += 1
            name = f"{name} {used_names[name]}"
        else:
            used_names[name] = 1
        entries.append(CodebookEntry(id=new_id, name=name, lab=lab, hsv=hsv))
    return ColorCodebook(entries=tuple(entries))


_HUE_BUCKETS = [
    (0, "red"), (30, "orange"), (60, "yellow"), (90, "chartreuse"),
    (120, "green"), (150, "spring green"), (180, "cyan"), (210, "azure"),
    (240, "blue"), (270, "violet"), (300, "magenta"), (330, "rose"),
]


def _bucket_name(lab: LabColor, hsv: HsvColor) -> str:
    if hsv.s < ACHROMATIC_SAT:
        if lab.l >= 85:
            return "white"
        if lab.l <= 25:
            return "black"
        return "gray"
    idx = int(((hsv.h + 15.0) % 360.0) // 30.0)
    base = _HUE_BUCKETS[idx][1]
    if lab.l >= 70:
        return f"light {base}"
    if lab.l < 40:
        return f"deep {base}"
    return base


# ---------------------------------------------------------------------------
# Annotation and hue ranges
# ---------------------------------------------------------------------------

def quantize_color(hsv: HsvColor, book: ColorCodebook,
                   cfg: AnnotationConfig = AnnotationConfig()) -> int:
    """Nearest codebook id under the weighted HSV distance; ties -> lower id."""
    if len(book) == 0:
        raise ValueError("codebook is empty")
    best_id, best_d = 0, np.inf
    for e in book.entries:
        d = weighted_hsv_distance(hsv, e.hsv, cfg, achromatic_rule=True)
        if d < best_d:
            best_id, best_d = e.id, d
    return best_id


def annotate_main_color(img: np.ndarray, book: ColorCodebook,
                        cfg: AnnotationConfig = AnnotationConfig()) -> int:
    """Quantize the first palette entry of ``img`` against the codebook."""
    palette = extract_palette(img, cfg)
    return quantize_color(lab_to_hsv(palette.first), book, cfg)


def hue_range(book: ColorCodebook, color_id: int) -> tuple:
    """Voronoi cell of the color's hue on the hue circle.

    Returned as half-open ``(start, end)`` intervals within [0, 360); cells of
    all chromatic entries partition the circle.  Achromatic entries (s < 0.1)
    get an empty range.  If several chromatic entries share a hue exactly the
    lowest id keeps the cell.
    """
    entry = book.entry(color_id)
    if entry.hsv.s < ACHROMATIC_SAT:
        return ()
    chromatic: dict[float, int] = {}
    for e in book.entries:
        if e.hsv.s >= ACHROMATIC_SAT and e.hsv.h not in chromatic:
            chromatic[e.hsv.h] = e.id
    if chromatic.get(entry.hsv.h) != entry.id:
        return ()
    hues = sorted(chromatic)
    if len(hues) == 1:
        return ((0.0, 360.0),)
    i = hues.index(entry.hsv.h)
    prev_h = hues[i - 1]
    next_h = hues[(i + 1) % len(hues)]
    h = entry.hsv.h
    # circular midpoints toward the neighbors
    start = (prev_h + ((h - prev_h) % 360.0) / 2.0) % 360.0
    end = (h + ((next_h - h) % 360.0) / 2.0) % 360.0
    if start < end:
        return ((start, end),)
    return ((start, 360.0), (0.0, end))


def hue_in_ranges(h: float, ranges) -> bool:
    h = float(h) % 360.0
    return any(start <= h < end for start, end in ranges)


def hue_distance_to_ranges(h: float, ranges) -> float:
    """Circular distance (degrees) from ``h`` to the nearest range border;
    0 when inside."""
    if not ranges:
        raise ValueError("empty hue range")
    if hue_in_ranges(h, ranges):
        return 0.0
    borders = [b % 360.0 for r in ranges for b in r]
    return min(hue_distance(h, b) for b in borders)


# ---------------------------------------------------------------------------
# PNG boundary
# ---------------------------------------------------------------------------

def save_image_png(path, img: np.ndarray) -> None:
    img = ensure_image(img)
    arr = np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path, format="PNG")


def image_png_bytes(img: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    img = ensure_image(img)
    arr = np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_image_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0
