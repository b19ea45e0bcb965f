"""Pluggable matcher / segmenter / inpainter interfaces with classical built-ins.

The pipeline only ever talks to the three interfaces below, so deployments can
swap in neural models (via the subprocess adapter) without touching the core.
The built-ins are deterministic and dependency-free: region growing for
segmentation, Jacobi diffusion for inpainting, Harris + NCC for matching.
"""

from __future__ import annotations

import abc
import json
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionMismatch,
    FullFrameMask,
    InsufficientTexture,
    OracleFailure,
    PromptConflict,
)
from .geometry import Correspondence, apply_points
from .imgio import load_image, save_image, to_gray
from .mask import load_mask_png, save_mask_png


@dataclass(frozen=True)
class MatchResult:
    correspondences: tuple
    similarity: float

    def __post_init__(self):
        if (len(self.correspondences) == 0) != (self.similarity == 0.0):
            raise ValueError("similarity must be 0 exactly when there are no matches")


class SegmenterInterface(abc.ABC):
    """segment(image, fg, bg) -> bool mask of image shape covering every fg point."""

    concurrent_safe = True

    @abc.abstractmethod
    def segment(self, image, foreground_points, background_points):
        ...


class InpainterInterface(abc.ABC):
    """inpaint(image, mask) -> image; pixels with mask=0 must pass through untouched."""

    concurrent_safe = True

    @abc.abstractmethod
    def inpaint(self, image, mask):
        ...


class MatcherInterface(abc.ABC):
    concurrent_safe = True

    @abc.abstractmethod
    def match(self, image_a, image_b) -> MatchResult:
        ...

    def match_views(self, view_set, i: int, j: int) -> MatchResult:
        """Hook for matchers that know view indices (e.g. the synthetic oracle)."""
        return self.match(view_set.load(i), view_set.load(j))


# ---------------------------------------------------------------------------
# region-growing segmenter
# ---------------------------------------------------------------------------

_NEIGH = ((0, 1), (0, -1), (1, 0), (-1, 0))


def _grow_regions(image_f, seeds, tol, max_region_px=None):
    """Layered BFS from each seed; admits 4-neighbors within tol of that seed's
    running region mean.

    All seeds advance through one shared layer loop but their regions and means
    stay fully independent, so the result equals growing each seed on its own.
    Returns an int32 array (n_seeds, H, W): -1 outside, else the BFS layer.
    """
    h, w = image_f.shape[:2]
    npix = h * w
    n_s = len(seeds)
    flat_img = image_f.reshape(-1, image_f.shape[2])
    gen = np.full((n_s, npix), -1, dtype=np.int32)
    seed_pix = np.array([int(p[1]) * w + int(p[0]) for p in seeds], dtype=np.int64)
    seed_ids = np.arange(n_s, dtype=np.int64)
    gen[seed_ids, seed_pix] = 0
    sums = flat_img[seed_pix].astype(np.float64).copy()
    counts = np.ones(n_s, dtype=np.int64)
    alive = np.ones(n_s, dtype=bool)

    f_pix = seed_pix
    f_seed = seed_ids
    layer = 0
    while len(f_pix):
        layer += 1
        fy, fx = f_pix // w, f_pix % w
        cand_pix = []
        cand_seed = []
        for dy, dx in _NEIGH:
            ny, nx = fy + dy, fx + dx
            ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
            cand_pix.append(ny[ok] * w + nx[ok])
            cand_seed.append(f_seed[ok])
        cp = np.concatenate(cand_pix)
        cs = np.concatenate(cand_seed)
        key = np.unique(cs * npix + cp)
        cs, cp = key // npix, key % npix
        fresh = gen[cs, cp] == -1
        cs, cp = cs[fresh], cp[fresh]
        if len(cp) == 0:
            break
        means = sums[cs] / counts[cs, None]
        dist = np.sqrt(((flat_img[cp] - means) ** 2).sum(axis=1))
        keep = (dist <= tol) & alive[cs]
        cs, cp = cs[keep], cp[keep]
        if len(cp) == 0:
            break
        gen[cs, cp] = layer
        np.add.at(sums, cs, flat_img[cp])
        np.add.at(counts, cs, 1)
        if max_region_px is not None:
            alive &= counts < max_region_px
            live = alive[cs]
            cs, cp = cs[live], cp[live]
        f_pix, f_seed = cp, cs
    return gen.reshape(n_s, h, w)


def _grow_region(image_f, seed, tol, max_region_px=None):
    return _grow_regions(image_f, [seed], tol, max_region_px)[0]


def builtin_segment_region_grow(image, fg, bg, tol: float, max_region_px=None):
    """Region growing from each foreground seed; union of per-seed regions.

    A region that covers a background point is rolled back along its growth
    layers until no background point is covered.
    """
    image = np.asarray(image)
    if tol <= 0:
        raise ValueError("tol must be > 0")
    fg = [(int(p[0]), int(p[1])) for p in fg]
    bg = [(int(p[0]), int(p[1])) for p in bg]
    if not fg:
        raise ValueError("need at least one foreground point")
    h, w = image.shape[:2]
    for x, y in fg + bg:
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"prompt ({x},{y}) outside {w}x{h} image")
    conflicts = set(fg) & set(bg)
    if conflicts:
        raise PromptConflict(f"foreground and background share {sorted(conflicts)}")

    image_f = image.astype(np.float64).reshape(h, w, -1)
    seeds = list(dict.fromkeys(fg))  # dedupe, keep order
    gens = _grow_regions(image_f, seeds, tol, max_region_px)
    out = np.zeros((h, w), dtype=bool)
    for gen in gens:
        out |= _apply_bg_cutoff(gen, bg)

    for x, y in fg:
        if not out[y, x]:
            raise PromptConflict(
                f"foreground point ({x},{y}) excluded by background constraints"
            )
    return out


def _apply_bg_cutoff(gen: np.ndarray, bg) -> np.ndarray:
    """Roll a grown region back to the layer before it reached a background point."""
    cutoff = None
    for bx, by in bg:
        g = gen[by, bx]
        if g >= 0:
            cutoff = g if cutoff is None else min(cutoff, g)
    if cutoff is None:
        return gen >= 0
    return (gen >= 0) & (gen < cutoff)


class BuiltinSegmenter(SegmenterInterface):
    """Region-growing segmenter.

    max_region_frac caps a single grown region at a fraction of the frame so a
    seed dropped on smooth background cannot flood the whole image; the capped
    region is still returned and scores as a bad candidate downstream.
    """

    concurrent_safe = False  # per-seed region cache is not locked

    def __init__(self, tol: float = 12.0, max_region_frac: float | None = None):
        self.tol = tol
        self.max_region_frac = max_region_frac
        self._cache = {}
        self._cache_images = {}

    def segment(self, image, foreground_points, background_points):
        image = np.asarray(image)
        h, w = image.shape[:2]
        fg = [(int(p[0]), int(p[1])) for p in foreground_points]
        bg = [(int(p[0]), int(p[1])) for p in background_points]
        if not fg:
            raise ValueError("need at least one foreground point")
        for x, y in fg + bg:
            if not (0 <= x < w and 0 <= y < h):
                raise ValueError(f"prompt ({x},{y}) outside {w}x{h} image")
        conflicts = set(fg) & set(bg)
        if conflicts:
            raise PromptConflict(f"foreground and background share {sorted(conflicts)}")
        cap = None
        if self.max_region_frac is not None:
            cap = int(self.max_region_frac * h * w)
        bg_key = tuple(sorted(set(bg)))

        seeds = list(dict.fromkeys(fg))
        # Holding cached images keeps their id() from being recycled.
        if len(self._cache_images) > 4 and id(image) not in self._cache_images:
            self._cache.clear()
            self._cache_images.clear()
        self._cache_images[id(image)] = image
        keys = [(id(image), image.shape, seed, bg_key) for seed in seeds]
        missing = [s for s, k in zip(seeds, keys) if k not in self._cache]
        if missing:
            image_f = image.astype(np.float64).reshape(h, w, -1)
            gens = _grow_regions(image_f, missing, self.tol, cap)
            for seed, gen in zip(missing, gens):
                self._cache[(id(image), image.shape, seed, bg_key)] = _apply_bg_cutoff(
                    gen, bg_key
                )
        out = np.zeros((h, w), dtype=bool)
        for k in keys:
            out |= self._cache[k]
        for x, y in fg:
            if not out[y, x]:
                raise PromptConflict(
                    f"foreground point ({x},{y}) excluded by background constraints"
                )
        return out


# ---------------------------------------------------------------------------
# diffusion inpainter
# ---------------------------------------------------------------------------

# Jacobi sweeps stop early once the largest per-pixel update falls below this
# (0..255 scale); the fixed point depends only on the boundary values.
_DIFFUSION_CONVERGED = 1e-3


def builtin_inpaint_diffusion(image, mask, iters: int = 2000):
    """Fill masked pixels by harmonic diffusion from the surrounding pixels.

    Masked pixels start at the mean color of the unmasked pixels bordering the
    mask, then Jacobi 4-neighbor averaging runs over masked pixels only.
    """
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if image.shape[:2] != mask.shape:
        raise DimensionMismatch(f"image {image.shape[:2]} vs mask {mask.shape}")
    if not mask.any():
        return image.copy()
    if mask.all():
        raise FullFrameMask("mask covers the whole frame")

    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    y0, y1 = max(ys.min() - 1, 0), min(ys.max() + 2, h)
    x0, x1 = max(xs.min() - 1, 0), min(xs.max() + 2, w)
    sub = image[y0:y1, x0:x1].astype(np.float64)
    smask = mask[y0:y1, x0:x1]

    ring = ndimage.binary_dilation(smask, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    ring &= ~smask
    if not ring.any():
        raise FullFrameMask("mask has no unmasked border inside the frame")
    seed_color = sub[ring].mean(axis=0)
    u = sub.copy()
    u[smask] = seed_color

    pad = np.pad(u, ((1, 1), (1, 1), (0, 0)), mode="edge")
    cnt = np.pad(np.ones(smask.shape), 1, mode="constant")
    neigh_cnt = cnt[:-2, 1:-1] + cnt[2:, 1:-1] + cnt[1:-1, :-2] + cnt[1:-1, 2:]
    neigh_cnt = neigh_cnt[smask][:, None]
    my, mx = np.nonzero(smask)
    for _ in range(iters):
        pad[1:-1, 1:-1] = u
        acc = (
            pad[:-2, 1:-1][smask]
            + pad[2:, 1:-1][smask]
            + pad[1:-1, :-2][smask]
            + pad[1:-1, 2:][smask]
        )
        new = acc / neigh_cnt
        delta = np.abs(new - u[my, mx]).max()
        u[my, mx] = new
        if delta < _DIFFUSION_CONVERGED:
            break

    out = image.copy()
    out[y0:y1, x0:x1][smask] = np.clip(np.rint(u[smask]), 0, 255).astype(image.dtype)
    return out


class BuiltinInpainter(InpainterInterface):
    def __init__(self, iters: int = 2000):
        self.iters = iters

    def inpaint(self, image, mask):
        return builtin_inpaint_diffusion(image, mask, self.iters)


# ---------------------------------------------------------------------------
# Harris + NCC matcher
# ---------------------------------------------------------------------------

_PATCH_RADIUS = 5  # 11x11 patches
_NMS_RADIUS = 8
_HARRIS_K = 0.04
# Flat frames have exactly-zero gradients; any real texture clears this floor.
_RESPONSE_FLOOR = 1e-6


def _harris_corners(gray, max_points):
    ix = ndimage.sobel(gray, axis=1, mode="reflect") / 8.0
    iy = ndimage.sobel(gray, axis=0, mode="reflect") / 8.0
    sxx = ndimage.gaussian_filter(ix * ix, 1.5, mode="reflect")
    syy = ndimage.gaussian_filter(iy * iy, 1.5, mode="reflect")
    sxy = ndimage.gaussian_filter(ix * iy, 1.5, mode="reflect")
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    resp = det - _HARRIS_K * trace * trace

    size = 2 * _NMS_RADIUS + 1
    local_max = ndimage.maximum_filter(resp, size=size, mode="constant", cval=-np.inf)
    peaks = (resp == local_max) & (resp > _RESPONSE_FLOOR)
    r = _PATCH_RADIUS
    peaks[:r, :] = peaks[-r:, :] = False
    peaks[:, :r] = peaks[:, -r:] = False
    ys, xs = np.nonzero(peaks)
    if len(xs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    order = np.argsort(-resp[ys, xs], kind="stable")[:max_points]
    return np.c_[xs[order], ys[order]]


def _normalized_patches(gray, corners):
    r = _PATCH_RADIUS
    patches = np.stack(
        [gray[y - r : y + r + 1, x - r : x + r + 1].ravel() for x, y in corners]
    )
    patches = patches - patches.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(patches, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return patches / norms


def _match_scale(image, max_dim):
    """Integer decimation factor and a block-averaged luma image for matching.

    Luma uses integer arithmetic (77R + 150G + 29B) >> 8 to avoid a float64
    pass over full-resolution frames; matching does not need exact ITU luma.
    """
    image = np.asarray(image)
    if image.ndim == 3:
        # 77 + 150 + 29 = 256, so the weighted sum fits in uint16
        r = image[..., 0].astype(np.uint16)
        g = image[..., 1].astype(np.uint16)
        b = image[..., 2].astype(np.uint16)
        gray = (77 * r + 150 * g + 29 * b) >> 8
    else:
        gray = image.astype(np.uint16)
    factor = 1
    longest = max(gray.shape[0], gray.shape[1])
    if max_dim and longest > max_dim:
        factor = int(np.ceil(longest / max_dim))
    if factor > 1:
        h2 = gray.shape[0] // factor
        w2 = gray.shape[1] // factor
        gray = (
            gray[: h2 * factor, : w2 * factor]
            .reshape(h2, factor, w2, factor)
            .mean(axis=(1, 3), dtype=np.float64)
        )
    return gray.astype(np.float64, copy=False), factor


def _scale_offset(factor: int) -> float:
    # corners live at decimated-block centers when factor > 1
    return (factor - 1) / 2.0


def builtin_match_harris_ncc(image_a, image_b, max_points: int = 400, max_dim: int = 1024) -> MatchResult:
    """Harris corners matched by NCC over 11x11 patches with mutual-best filtering.

    Frames larger than max_dim are matched on an integer-decimated pyramid
    level and the correspondences are scaled back to full resolution.
    """
    ga, factor_a = _match_scale(image_a, max_dim)
    gb, factor_b = _match_scale(image_b, max_dim)
    ca = _harris_corners(ga, max_points)
    cb = _harris_corners(gb, max_points)
    if len(ca) < 8 or len(cb) < 8:
        raise InsufficientTexture(f"{len(ca)} / {len(cb)} corners found, need >= 8")
    pa = _normalized_patches(ga, ca)
    pb = _normalized_patches(gb, cb)
    ncc = pa @ pb.T
    best_ab = ncc.argmax(axis=1)
    best_ba = ncc.argmax(axis=0)
    mutual = np.flatnonzero(best_ba[best_ab] == np.arange(len(ca)))
    off_a = _scale_offset(factor_a)
    off_b = _scale_offset(factor_b)
    corrs = tuple(
        Correspondence(
            (float(ca[i][0] * factor_a + off_a), float(ca[i][1] * factor_a + off_a)),
            (
                float(cb[best_ab[i]][0] * factor_b + off_b),
                float(cb[best_ab[i]][1] * factor_b + off_b),
            ),
            confidence=float(np.clip((ncc[i, best_ab[i]] + 1.0) / 2.0, 0.0, 1.0)),
        )
        for i in mutual
    )
    similarity = len(mutual) / min(len(ca), len(cb)) if corrs else 0.0
    return MatchResult(corrs, similarity)


class BuiltinMatcher(MatcherInterface):
    """Harris+NCC matcher with a small per-image feature cache.

    Adjacent-pair estimation visits every interior view twice; caching the
    corner/patch extraction halves the work. Cached images are held strongly
    so their id() stays valid for the cache key.
    """

    def __init__(self, max_points: int = 400, max_dim: int = 1024):
        self.max_points = max_points
        self.max_dim = max_dim
        self._features = {}
        self._lock = threading.Lock()

    def _features_for(self, image):
        key = (id(image), image.shape if hasattr(image, "shape") else None)
        with self._lock:
            hit = self._features.get(key)
        if hit is not None:
            return hit[1:]
        gray, factor = _match_scale(image, self.max_dim)
        corners = _harris_corners(gray, self.max_points)
        patches = _normalized_patches(gray, corners) if len(corners) else None
        with self._lock:
            if len(self._features) >= 8:
                self._features.pop(next(iter(self._features)))
            self._features[key] = (image, corners, patches, factor)
        return corners, patches, factor

    def match(self, image_a, image_b) -> MatchResult:
        image_a = np.asarray(image_a)
        image_b = np.asarray(image_b)
        ca, pa, factor_a = self._features_for(image_a)
        cb, pb, factor_b = self._features_for(image_b)
        if len(ca) < 8 or len(cb) < 8:
            raise InsufficientTexture(f"{len(ca)} / {len(cb)} corners found, need >= 8")
        ncc = pa @ pb.T
        best_ab = ncc.argmax(axis=1)
        best_ba = ncc.argmax(axis=0)
        mutual = np.flatnonzero(best_ba[best_ab] == np.arange(len(ca)))
        off_a = _scale_offset(factor_a)
        off_b = _scale_offset(factor_b)
        corrs = tuple(
            Correspondence(
                (float(ca[i][0] * factor_a + off_a), float(ca[i][1] * factor_a + off_a)),
                (
                    float(cb[best_ab[i]][0] * factor_b + off_b),
                    float(cb[best_ab[i]][1] * factor_b + off_b),
                ),
                confidence=float(np.clip((ncc[i, best_ab[i]] + 1.0) / 2.0, 0.0, 1.0)),
            )
            for i in mutual
        )
        similarity = len(mutual) / min(len(ca), len(cb)) if corrs else 0.0
        return MatchResult(corrs, similarity)


# ---------------------------------------------------------------------------
# synthetic ground-truth matcher
# ---------------------------------------------------------------------------


def synthetic_exact_matcher(
    scene, i: int, j: int, n_points: int, outlier_ratio: float, noise_px: float, seed: int
) -> MatchResult:
    """Correspondences from a synthetic scene's ground-truth homography.

    Gaussian noise of std noise_px on the targets; exactly
    round(outlier_ratio * n_points) pairs get uniform-random targets instead.
    """
    if not (0 <= outlier_ratio < 1):
        raise ValueError("outlier_ratio must be in [0, 1)")
    rng = np.random.default_rng(seed)
    w, h = scene.size
    h_gt = scene.gt_composite(i, j)
    margin = 3.0 * noise_px + 1.0

    src = np.empty((0, 2))
    dst = np.empty((0, 2))
    while len(src) < n_points:
        pts = rng.uniform([0, 0], [w - 1, h - 1], size=(max(2 * n_points, 64), 2))
        mapped = apply_points(h_gt, pts)
        ok = (
            (mapped[:, 0] >= margin)
            & (mapped[:, 0] <= w - 1 - margin)
            & (mapped[:, 1] >= margin)
            & (mapped[:, 1] <= h - 1 - margin)
        )
        src = np.vstack([src, pts[ok]])
        dst = np.vstack([dst, mapped[ok]])
    src = src[:n_points]
    dst = dst[:n_points]

    if noise_px > 0:
        dst = dst + rng.normal(0.0, noise_px, dst.shape)
        dst[:, 0] = np.clip(dst[:, 0], 0, w - 1)
        dst[:, 1] = np.clip(dst[:, 1], 0, h - 1)
    n_out = round(outlier_ratio * n_points)
    if n_out:
        which = rng.choice(n_points, size=n_out, replace=False)
        dst[which] = rng.uniform([0, 0], [w - 1, h - 1], size=(n_out, 2))

    corrs = tuple(
        Correspondence((float(p[0]), float(p[1])), (float(q[0]), float(q[1])))
        for p, q in zip(src, dst)
    )
    return MatchResult(corrs, 1.0 - outlier_ratio)


class SyntheticMatcher(MatcherInterface):
    """Ground-truth-backed matcher for synthetic scenes; per-pair deterministic."""

    def __init__(self, scene, n_points=150, outlier_ratio=0.0, noise_px=0.0, seed=0):
        self.scene = scene
        self.n_points = n_points
        self.outlier_ratio = outlier_ratio
        self.noise_px = noise_px
        self.seed = seed

    def match(self, image_a, image_b) -> MatchResult:
        raise NotImplementedError("synthetic matcher works on view indices")

    def match_views(self, view_set, i: int, j: int) -> MatchResult:
        return synthetic_exact_matcher(
            self.scene,
            i,
            j,
            self.n_points,
            self.outlier_ratio,
            self.noise_px,
            seed=self.seed + 7919 * i + j,
        )


# ---------------------------------------------------------------------------
# contract-enforcing wrappers
# ---------------------------------------------------------------------------


class CheckedInpainter(InpainterInterface):
    """Verifies (not trusts) that mask=0 pixels pass through bit-identical."""

    def __init__(self, inner: InpainterInterface):
        self.inner = inner
        self.concurrent_safe = getattr(inner, "concurrent_safe", True)

    def inpaint(self, image, mask):
        out = self.inner.inpaint(image, mask)
        keep = ~np.asarray(mask, dtype=bool)
        if out.shape != image.shape or not np.array_equal(out[keep], image[keep]):
            raise OracleFailure(
                f"{type(self.inner).__name__} modified pixels outside the mask"
            )
        return out


class CheckedSegmenter(SegmenterInterface):
    def __init__(self, inner: SegmenterInterface):
        self.inner = inner
        self.concurrent_safe = getattr(inner, "concurrent_safe", True)

    def segment(self, image, foreground_points, background_points):
        out = self.inner.segment(image, foreground_points, background_points)
        out = np.asarray(out, dtype=bool)
        if out.shape != np.asarray(image).shape[:2]:
            raise OracleFailure(
                f"{type(self.inner).__name__} returned mask of shape {out.shape}"
            )
        return out


# ---------------------------------------------------------------------------
# subprocess adapter
# ---------------------------------------------------------------------------


class _SubprocessOracle:
    """One JSON request on stdin, one JSON reply on stdout, images as temp files."""

    concurrent_safe = False

    def __init__(self, command):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)

    def _call(self, request: dict) -> dict:
        try:
            proc = subprocess.run(
                self.command,
                input=json.dumps(request).encode(),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                check=False,
            )
        except OSError as exc:
            raise OracleFailure(f"cannot run {self.command}: {exc}") from exc
        if proc.returncode != 0:
            raise OracleFailure(
                f"oracle exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}"
            )
        try:
            reply = json.loads(proc.stdout.decode())
        except ValueError as exc:
            raise OracleFailure(f"oracle reply is not JSON: {exc}") from exc
        if reply.get("status") != "ok":
            raise OracleFailure(f"oracle status {reply.get('status')!r}", reply=reply)
        return reply


class SubprocessSegmenter(_SubprocessOracle, SegmenterInterface):
    def segment(self, image, foreground_points, background_points):
        with tempfile.TemporaryDirectory(prefix="homer-seg-") as td:
            image_path = str(Path(td) / "image.png")
            save_image(image, image_path)
            reply = self._call(
                {
                    "op": "segment",
                    "image_path": image_path,
                    "fg_points": [[int(x), int(y)] for x, y in foreground_points],
                    "bg_points": [[int(x), int(y)] for x, y in background_points],
                }
            )
            if "mask_path" not in reply:
                raise OracleFailure("segment reply missing mask_path", reply=reply)
            return load_mask_png(reply["mask_path"])


class SubprocessInpainter(_SubprocessOracle, InpainterInterface):
    def inpaint(self, image, mask):
        with tempfile.TemporaryDirectory(prefix="homer-inp-") as td:
            image_path = str(Path(td) / "image.png")
            mask_path = str(Path(td) / "mask.png")
            save_image(image, image_path)
            save_mask_png(mask, mask_path)
            reply = self._call(
                {"op": "inpaint", "image_path": image_path, "mask_path": mask_path}
            )
            if "image_path" not in reply:
                raise OracleFailure("inpaint reply missing image_path", reply=reply)
            return load_image(reply["image_path"])


class SubprocessMatcher(_SubprocessOracle, MatcherInterface):
    def match(self, image_a, image_b) -> MatchResult:
        with tempfile.TemporaryDirectory(prefix="homer-match-") as td:
            path_a = str(Path(td) / "a.png")
            path_b = str(Path(td) / "b.png")
            save_image(image_a, path_a)
            save_image(image_b, path_b)
            reply = self._call(
                {"op": "match", "image_path": path_a, "aux_image_path": path_b}
            )
            if "correspondences" not in reply:
                raise OracleFailure("match reply missing correspondences", reply=reply)
            corrs = tuple(
                Correspondence(
                    (float(c["p"][0]), float(c["p"][1])),
                    (float(c["p_prime"][0]), float(c["p_prime"][1])),
                    confidence=float(c.get("confidence", 1.0)),
                )
                for c in reply["correspondences"]
            )
            if corrs:
                similarity = float(reply.get("similarity", 1.0))
            else:
                similarity = 0.0
            return MatchResult(corrs, similarity)


@dataclass
class OracleSet:
    """The three oracles a pipeline run needs, with contract checks applied."""

    matcher: MatcherInterface
    segmenter: SegmenterInterface
    inpainter: InpainterInterface

    @staticmethod
    def builtin(seg_tol: float = 12.0, inpaint_iters: int = 2000) -> "OracleSet":
        return OracleSet(
            matcher=BuiltinMatcher(),
            segmenter=BuiltinSegmenter(tol=seg_tol, max_region_frac=1 / 3),
            inpainter=BuiltinInpainter(iters=inpaint_iters),
        )

    def checked(self) -> "OracleSet":
        return OracleSet(
            matcher=self.matcher,
            segmenter=CheckedSegmenter(self.segmenter),
            inpainter=CheckedInpainter(self.inpainter),
        )
