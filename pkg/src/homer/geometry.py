"""Planar homographies: estimation (normalized DLT + RANSAC) and backward warps.

Conventions: points are (x, y) pixel coordinates, matrices act on column
vectors [x, y, 1]^T. Every matrix handed out is scale-normalized to unit
Frobenius norm with a deterministic sign, so equal transforms compare equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegenerateHomography,
    DegeneratePoint,
    NoConsensus,
    TooFewCorrespondences,
)

# Projective depths smaller than this are treated as points at infinity.
DEPTH_EPS = 1e-10
# Triangle-area tolerance for the collinearity precondition.
COLLINEAR_EPS = 1e-8
# Confidence used for the adaptive RANSAC iteration bound.
RANSAC_CONFIDENCE = 0.999


def _canonical_sign(m: np.ndarray) -> np.ndarray:
    # h33 >= 0 when nonzero; otherwise first nonzero entry decides.
    flat = m.reshape(-1)
    if abs(flat[8]) > 1e-15:
        return m if flat[8] > 0 else -m
    for v in flat:
        if abs(v) > 1e-15:
            return m if v > 0 else -m
    return m


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective transform, unit Frobenius norm, h33 >= 0 when nonzero."""

    matrix: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    @staticmethod
    def from_matrix(m) -> "Homography":
        m = np.asarray(m, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise DegenerateHomography("non-finite entries")
        norm = float(np.linalg.norm(m))
        if norm < 1e-30:
            raise DegenerateHomography("zero matrix")
        m = _canonical_sign(m / norm)
        if abs(float(np.linalg.det(m))) <= 1e-10:
            raise DegenerateHomography("matrix is singular after normalization")
        m.setflags(write=False)
        return Homography(m)

    @staticmethod
    def identity() -> "Homography":
        return Homography.from_matrix(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Homography":
        m = np.eye(3)
        m[0, 2] = tx
        m[1, 2] = ty
        return Homography.from_matrix(m)

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.matrix))

    def as_tuple(self) -> tuple:
        return tuple(float(v) for v in self.matrix.reshape(-1))


@dataclass(frozen=True)
class Correspondence:
    """Matched pixel pair: p in the source view, p_prime in the target view."""

    p: tuple
    p_prime: tuple
    confidence: float = 1.0


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold_px: float = 3.0
    max_iterations: int = 2000
    min_inlier_ratio: float = 0.15
    rng_seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold_px <= 0:
            raise ValueError("inlier_threshold_px must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (0 < self.min_inlier_ratio <= 1):
            raise ValueError("min_inlier_ratio must be in (0, 1]")


@dataclass(frozen=True)
class RansacResult:
    homography: Homography
    inlier_indices: tuple
    mean_inlier_error_px: float
    iterations_used: int
    total_correspondences: int = 0

    @property
    def inlier_ratio(self) -> float:
        if self.total_correspondences == 0:
            return 0.0
        return len(self.inlier_indices) / self.total_correspondences


def apply(h: Homography, p) -> tuple:
    """Map one point through the homography; rejects near-zero projective depth."""
    x, y = float(p[0]), float(p[1])
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= DEPTH_EPS:
        raise DegeneratePoint(f"point {p} has projective depth {w}")
    xp = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    yp = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    return (xp, yp)


def apply_points(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized apply for an (N,2) array. Degenerate rows come back as inf."""
    pts = np.asarray(pts, dtype=np.float64)
    ph = np.c_[pts, np.ones(len(pts))]
    q = ph @ h.matrix.T
    w = q[:, 2]
    bad = np.abs(w) <= DEPTH_EPS
    w = np.where(bad, 1.0, w)
    out = q[:, :2] / w[:, None]
    out[bad] = np.inf
    return out


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]], dtype=np.float64)


def _check_collinear(pts: np.ndarray):
    # All-triples test; only used on small sets where it is exact and cheap.
    n = len(pts)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            d1 = pts[j] - pts[i]
            for k in range(j + 1, n):
                d2 = pts[k] - pts[i]
                if abs(d1[0] * d2[1] - d1[1] * d2[0]) <= COLLINEAR_EPS:
                    raise DegenerateConfiguration(
                        f"source points {i},{j},{k} are collinear or duplicated"
                    )


def _as_point_arrays(correspondences):
    src = np.array([c.p for c in correspondences], dtype=np.float64)
    dst = np.array([c.p_prime for c in correspondences], dtype=np.float64)
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateConfiguration("non-finite correspondence coordinates")
    return src, dst


def estimate_dlt(correspondences) -> Homography:
    """Least-squares homography from >=4 correspondences (normalized DLT)."""
    if len(correspondences) < 4:
        raise TooFewCorrespondences(f"need >= 4, got {len(correspondences)}")
    src, dst = _as_point_arrays(correspondences)
    return _dlt_from_arrays(src, dst)


def _dlt_from_arrays(src: np.ndarray, dst: np.ndarray) -> Homography:
    n = len(src)
    if n <= 12:
        _check_collinear(src)

    t_src = _hartley_normalization(src)
    t_dst = _hartley_normalization(dst)
    x = t_src[0, 0] * src[:, 0] + t_src[0, 2]
    y = t_src[1, 1] * src[:, 1] + t_src[1, 2]
    u = t_dst[0, 0] * dst[:, 0] + t_dst[0, 2]
    v = t_dst[1, 1] * dst[:, 1] + t_dst[1, 2]

    a = np.zeros((2 * n, 9))
    even = a[0::2]
    odd = a[1::2]
    even[:, 0] = x
    even[:, 1] = y
    even[:, 2] = 1.0
    even[:, 6] = -u * x
    even[:, 7] = -u * y
    even[:, 8] = -u
    odd[:, 3] = x
    odd[:, 4] = y
    odd[:, 5] = 1.0
    odd[:, 6] = -v * x
    odd[:, 7] = -v * y
    odd[:, 8] = -v

    _, s, vt = np.linalg.svd(a)
    # A unique solution needs exactly one (near-)zero singular value.
    if s[0] > 0 and s[-2] / s[0] < 1e-10:
        raise DegenerateConfiguration("rank-deficient constraint system")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    return Homography.from_matrix(h)


def _errors_from_homogeneous(m: np.ndarray, src_h: np.ndarray, dst: np.ndarray) -> np.ndarray:
    q = src_h @ m.T
    w = q[:, 2]
    bad = np.abs(w) <= DEPTH_EPS
    w = np.where(bad, 1.0, w)
    dx = q[:, 0] / w - dst[:, 0]
    dy = q[:, 1] / w - dst[:, 1]
    err = np.sqrt(dx * dx + dy * dy)
    err[bad] = np.inf
    return err


def _reprojection_errors(h: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    src_h = np.c_[src, np.ones(len(src))]
    return _errors_from_homogeneous(h.matrix, src_h, dst)


def reprojection_error_sq(h: Homography, correspondences) -> float:
    """Summed squared reprojection error over all pairs."""
    src, dst = _as_point_arrays(correspondences)
    err = _reprojection_errors(h, src, dst)
    finite = err[np.isfinite(err)]
    return float((finite**2).sum()) if len(finite) else float("inf")


def ransac_estimate(correspondences, cfg: RansacConfig) -> RansacResult:
    """Robust homography fit: 4-point samples, inlier consensus, full-inlier refit.

    Deterministic for a fixed cfg.rng_seed. Stops early once the standard
    adaptive bound says the best consensus set was sampled with high confidence.
    """
    n = len(correspondences)
    if n < 4:
        raise TooFewCorrespondences(f"need >= 4, got {n}")
    src, dst = _as_point_arrays(correspondences)

    if n == 4:
        h = _dlt_from_arrays(src, dst)
        err = _reprojection_errors(h, src, dst)
        inl = np.flatnonzero(err <= cfg.inlier_threshold_px)
        mean_err = float(err[inl].mean()) if len(inl) else 0.0
        return RansacResult(h, tuple(int(i) for i in inl), mean_err, 0, n)

    rng = np.random.default_rng(cfg.rng_seed)
    src_h = np.c_[src, np.ones(n)]
    best_count = -1
    best_mean = np.inf
    best_h = None
    best_mask = None
    last_degenerate = None
    iterations = 0

    for it in range(cfg.max_iterations):
        iterations = it + 1
        idx = rng.choice(n, size=4, replace=False)
        try:
            h = _dlt_from_arrays(src[idx], dst[idx])
        except (DegenerateConfiguration, DegenerateHomography) as exc:
            last_degenerate = exc
            continue
        err = _errors_from_homogeneous(h.matrix, src_h, dst)
        mask = err <= cfg.inlier_threshold_px
        count = int(mask.sum())
        mean_err = float(err[mask].mean()) if count else np.inf
        if count > best_count or (count == best_count and mean_err < best_mean):
            best_count, best_mean, best_h, best_mask = count, mean_err, h, mask
            w = count / n
            if w >= 1.0:
                break
            if w > 0:
                denom = math.log(max(1.0 - w**4, 1e-12))
                if denom < 0:
                    needed = math.log(1.0 - RANSAC_CONFIDENCE) / denom
                    if iterations >= needed:
                        break

    if best_h is None:
        raise last_degenerate or DegenerateConfiguration("no valid minimal sample")
    if best_count / n < cfg.min_inlier_ratio:
        raise NoConsensus(
            f"best inlier ratio {best_count / n:.3f} < {cfg.min_inlier_ratio}"
        )

    # Variance-reducing refit on the consensus set, then re-score.
    final_h = best_h
    if best_count >= 4:
        try:
            final_h = _dlt_from_arrays(src[best_mask], dst[best_mask])
        except (DegenerateConfiguration, DegenerateHomography):
            final_h = best_h
    err = _reprojection_errors(final_h, src, dst)
    inl = np.flatnonzero(err <= cfg.inlier_threshold_px)
    if len(inl) == 0:  # refit made things worse; keep the sampled model
        final_h = best_h
        err = _reprojection_errors(final_h, src, dst)
        inl = np.flatnonzero(err <= cfg.inlier_threshold_px)
    mean_err = float(err[inl].mean()) if len(inl) else 0.0
    return RansacResult(final_h, tuple(int(i) for i in inl), mean_err, iterations, n)


def chain(h_ab: Homography, h_bc: Homography) -> Homography:
    """Composite transform: apply(chain(ab, bc), p) == apply(bc, apply(ab, p))."""
    return Homography.from_matrix(h_bc.matrix @ h_ab.matrix)


def _backward_coords(h: Homography, target_size) -> tuple:
    """Source-sample coordinates for every target pixel, via the inverse map."""
    w, hgt = int(target_size[0]), int(target_size[1])
    inv = h.inverse().matrix
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(hgt, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    depth = inv[2, 0] * gx + inv[2, 1] * gy + inv[2, 2]
    ok = np.abs(depth) > DEPTH_EPS
    safe = np.where(ok, depth, 1.0)
    sx = (inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]) / safe
    sy = (inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]) / safe
    return sx, sy, ok


def warp_mask(mask: np.ndarray, h: Homography, target_size) -> np.ndarray:
    """Backward-warp a boolean mask with nearest-neighbor lookup.

    Out-of-bounds and depth-degenerate lookups produce 0.
    """
    mask = np.asarray(mask, dtype=bool)
    src_h, src_w = mask.shape
    sx, sy, ok = _backward_coords(h, target_size)
    ix = np.rint(sx).astype(np.int64)
    iy = np.rint(sy).astype(np.int64)
    ok = ok & (ix >= 0) & (ix < src_w) & (iy >= 0) & (iy < src_h)
    out = np.zeros(ok.shape, dtype=bool)
    out[ok] = mask[iy[ok], ix[ok]]
    return out


# Sub-pixel jitter below this snaps to the exact grid position, so identity
# and integer translations reproduce pixels bit-for-bit.
_SNAP_EPS = 1e-6


def warp_image(image: np.ndarray, h: Homography, target_size) -> tuple:
    """Backward-warp an RGB image with bilinear sampling.

    Returns (warped, validity). A target pixel is valid iff its whole bilinear
    footprint is inside the source frame; invalid pixels are black.
    """
    image = np.asarray(image)
    src_h, src_w = image.shape[:2]
    sx, sy, ok = _backward_coords(h, target_size)

    rx = np.rint(sx)
    ry = np.rint(sy)
    sx = np.where(np.abs(sx - rx) < _SNAP_EPS, rx, sx)
    sy = np.where(np.abs(sy - ry) < _SNAP_EPS, ry, sy)

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    # The footprint collapses to one row/column at exact integer coordinates.
    x1 = x0 + (fx > 0)
    y1 = y0 + (fy > 0)
    valid = ok & (x0 >= 0) & (x1 <= src_w - 1) & (y0 >= 0) & (y1 <= src_h - 1)

    x0i = np.clip(x0, 0, src_w - 1).astype(np.int64)
    x1i = np.clip(x1, 0, src_w - 1).astype(np.int64)
    y0i = np.clip(y0, 0, src_h - 1).astype(np.int64)
    y1i = np.clip(y1, 0, src_h - 1).astype(np.int64)

    img = image.astype(np.float64)
    w00 = ((1 - fx) * (1 - fy))[..., None]
    w10 = (fx * (1 - fy))[..., None]
    w01 = ((1 - fx) * fy)[..., None]
    w11 = (fx * fy)[..., None]
    acc = (
        img[y0i, x0i] * w00
        + img[y0i, x1i] * w10
        + img[y1i, x0i] * w01
        + img[y1i, x1i] * w11
    )
    out = np.where(valid[..., None], np.rint(acc), 0.0)
    return np.clip(out, 0, 255).astype(np.uint8), valid
