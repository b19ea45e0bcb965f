"""Binary mask algebra: IoU, centroid, boundary sampling, shape-context distance.

Masks are boolean (H, W) arrays; 1 marks pixels of the object to be removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyMask


def as_mask(a) -> np.ndarray:
    m = np.asarray(a)
    if m.ndim != 2:
        raise DimensionMismatch(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool)


def area(m: np.ndarray) -> int:
    return int(np.count_nonzero(m))


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    a = as_mask(a)
    b = as_mask(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def centroid(m: np.ndarray) -> tuple:
    """Mean (x, y) of set pixels."""
    m = as_mask(m)
    ys, xs = np.nonzero(m)
    if len(xs) == 0:
        raise EmptyMask("centroid of empty mask")
    return (float(xs.mean()), float(ys.mean()))


def boundary_pixels(m: np.ndarray) -> np.ndarray:
    """All 4-connected boundary pixels as an (N, 2) array of (x, y), row-major order.

    Pixels on the image border count as boundary (the outside is unset).
    """
    m = as_mask(m)
    if not m.any():
        raise EmptyMask("boundary of empty mask")
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    ys, xs = np.nonzero(m & ~interior)
    return np.c_[xs, ys].astype(np.float64)


def boundary_points(m: np.ndarray, n: int, seed: int = 0) -> np.ndarray:
    """n boundary pixels sampled uniformly without replacement (all if fewer exist)."""
    if n < 8:
        raise ValueError("n must be >= 8")
    pts = boundary_pixels(m)
    if len(pts) <= n:
        return pts
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(pts), size=n, replace=False))
    return pts[idx]


@dataclass(frozen=True)
class ShapeContextConfig:
    boundary_samples: int = 100
    radial_bins: int = 5
    angular_bins: int = 12
    r_inner: float = 0.125
    r_outer: float = 2.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.r_inner >= self.r_outer:
            raise ValueError("r_inner must be < r_outer")
        if self.boundary_samples < self.angular_bins:
            raise ValueError("boundary_samples must be >= angular_bins")


def _descriptors(pts: np.ndarray, cfg: ShapeContextConfig) -> np.ndarray:
    """Log-polar histogram per point, radii normalized by mean pairwise distance."""
    n = len(pts)
    diff = pts[None, :, :] - pts[:, None, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    off = ~np.eye(n, dtype=bool)
    mean_d = dist[off].mean() if n > 1 else 1.0
    if mean_d <= 0:
        mean_d = 1.0
    nd = dist / mean_d
    ang = np.arctan2(diff[:, :, 1], diff[:, :, 0])

    edges = np.geomspace(cfg.r_inner, cfg.r_outer, cfg.radial_bins + 1)
    rbin = np.searchsorted(edges, nd, side="right") - 1
    rbin = np.maximum(rbin, 0)  # closer than r_inner falls in the first bin
    abin = np.floor((ang + np.pi) / (2 * np.pi / cfg.angular_bins)).astype(np.int64)
    abin = np.clip(abin, 0, cfg.angular_bins - 1)

    counted = off & (rbin < cfg.radial_bins)  # beyond r_outer is ignored
    flat = rbin * cfg.angular_bins + abin
    nbins = cfg.radial_bins * cfg.angular_bins
    hist = np.zeros((n, nbins))
    for i in range(n):
        sel = counted[i]
        if sel.any():
            hist[i] = np.bincount(flat[i][sel], minlength=nbins)
            hist[i] /= hist[i].sum()
    return hist


def _chi2_matrix(ha: np.ndarray, hb: np.ndarray) -> np.ndarray:
    # Accumulate per bin; empty-bin pairs contribute exactly 0 (numerator is 0,
    # and the tiny denominator guard never divides 0 by 0).
    ha = ha.astype(np.float32)
    hb = hb.astype(np.float32)
    out = np.zeros((ha.shape[0], hb.shape[0]), dtype=np.float64)
    for b in range(ha.shape[1]):
        g = ha[:, b][:, None]
        h = hb[:, b][None, :]
        diff = g - h
        out += diff * diff / (g + h + np.float32(1e-20))
    return 0.5 * out


def _greedy_assignment_cost(cost: np.ndarray) -> float:
    """Mean cost of a greedy minimum assignment; ties broken by (row, col)."""
    na, nb = cost.shape
    k = min(na, nb)
    rows, cols = np.indices(cost.shape)
    order = np.lexsort((cols.ravel(), rows.ravel(), cost.ravel()))
    used_a = np.zeros(na, dtype=bool)
    used_b = np.zeros(nb, dtype=bool)
    total = 0.0
    taken = 0
    flat = cost.ravel()
    ri = rows.ravel()
    ci = cols.ravel()
    for o in order:
        i, j = ri[o], ci[o]
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = True
        used_b[j] = True
        total += flat[o]
        taken += 1
        if taken == k:
            break
    return total / k if k else 0.0


def shape_context_distance(a: np.ndarray, b: np.ndarray, cfg: ShapeContextConfig) -> float:
    """Boundary-shape dissimilarity; translation- and scale-invariant.

    Greedy chi-squared matching of log-polar boundary descriptors. Identical
    masks (same seed) give exactly 0.
    """
    pa = boundary_points(a, cfg.boundary_samples, seed=cfg.rng_seed)
    pb = boundary_points(b, cfg.boundary_samples, seed=cfg.rng_seed)
    da = _descriptors(pa, cfg)
    db = _descriptors(pb, cfg)
    return float(_greedy_assignment_cost(_chi2_matrix(da, db)))


# -- serialization --


def mask_to_rle(m: np.ndarray) -> dict:
    """Row-major RLE: alternating zero/one run lengths, starting with the zero run."""
    m = as_mask(m)
    h, w = m.shape
    flat = m.reshape(-1)
    runs = []
    if flat.size:
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], changes, [flat.size]))
        lengths = np.diff(bounds)
        if flat[0]:  # must start with a zero run
            runs.append(0)
        runs.extend(int(v) for v in lengths)
    return {"width": w, "height": h, "runs": runs}


def mask_from_rle(obj: dict) -> np.ndarray:
    w = int(obj["width"])
    h = int(obj["height"])
    runs = obj["runs"]
    if sum(runs) != w * h:
        raise ValueError(f"run lengths sum to {sum(runs)}, expected {w * h}")
    flat = np.zeros(w * h, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(h, w)


def save_mask_png(m: np.ndarray, path) -> None:
    from PIL import Image

    img = Image.fromarray(as_mask(m).astype(np.uint8) * 255, mode="L").convert("1")
    img.save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("1"), dtype=bool)
