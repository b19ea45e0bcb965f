"""Synthetic planar multi-view scenes with exact ground truth.

A scene is a textured plane with flat-colored objects on smooth "mats". Each
view is the plane seen through a known plane-to-image homography, so ground
truth is available for everything: adjacent-pair homographies, per-view object
masks, and object-free clean plates. Rendering evaluates the procedural plane
color at each pixel's plane coordinates; object membership is a hard test on
the same coordinates, which makes ground-truth masks exact.

The mats matter for two reasons: corners for the feature matcher live on the
textured area outside them, while the smooth gradient inside them is something
a diffusion inpainter can actually reproduce, and any warp misalignment of
propagated content shows up against the gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import Homography, chain
from .imgio import save_image
from .mask import save_mask_png

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """splitmix64-style lattice hash to [0, 1), float32 output."""
    seed_term = np.uint64((seed * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF)
    # int64 -> uint64 via view: free, and the wraparound is fine for hashing
    z = ix.view(np.uint64) * _GOLD + iy.view(np.uint64) * _MIX1 + seed_term
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(40)).astype(np.float32) / np.float32(2**24)


def _value_noise(u, v, cell: float, seed: int):
    gu = u * np.float32(1.0 / cell)
    gv = v * np.float32(1.0 / cell)
    iu = np.floor(gu)
    iv = np.floor(gv)
    fu = gu - iu
    fv = gv - iv
    # Hermite smoothstep keeps the field C1, so colors vary gently.
    fu = fu * fu * (3 - 2 * fu)
    fv = fv * fv * (3 - 2 * fv)
    iu = iu.astype(np.int64)
    iv = iv.astype(np.int64)
    v00 = _hash01(iu, iv, seed)
    v10 = _hash01(iu + 1, iv, seed)
    v01 = _hash01(iu, iv + 1, seed)
    v11 = _hash01(iu + 1, iv + 1, seed)
    top = v00 + (v10 - v00) * fu
    bot = v01 + (v11 - v01) * fu
    return top + (bot - top) * fv


@dataclass(frozen=True)
class ObjectSpec:
    """Flat-colored object on the plane. Shapes: disk, rectangle, polygon."""

    shape: str
    color: tuple
    center: tuple = (0.0, 0.0)
    radius: float = 20.0  # disk
    size: tuple = (40.0, 30.0)  # rectangle (width, height)
    vertices: tuple = ()  # polygon, ((x, y), ...)

    def membership(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.shape == "disk":
            return (u - self.center[0]) ** 2 + (v - self.center[1]) ** 2 <= self.radius**2
        if self.shape == "rectangle":
            return (np.abs(u - self.center[0]) <= self.size[0] / 2) & (
                np.abs(v - self.center[1]) <= self.size[1] / 2
            )
        if self.shape == "polygon":
            inside = np.zeros(u.shape, dtype=bool)
            pts = self.vertices
            n = len(pts)
            for a in range(n):
                x1, y1 = pts[a]
                x2, y2 = pts[(a + 1) % n]
                crosses = (y1 <= v) != (y2 <= v)
                with np.errstate(divide="ignore", invalid="ignore"):
                    xint = x1 + (v - y1) * (x2 - x1) / (y2 - y1)
                inside ^= crosses & (u < xint)
            return inside
        raise ValidationError(f"unknown shape {self.shape!r}")

    def extent_radius(self) -> float:
        if self.shape == "disk":
            return self.radius
        if self.shape == "rectangle":
            return float(np.hypot(self.size[0], self.size[1]) / 2)
        d = [np.hypot(x - self.center[0], y - self.center[1]) for x, y in self.vertices]
        return float(max(d)) if d else 1.0


@dataclass(frozen=True)
class CameraSpec:
    translation_frac: float = 0.12
    rotation_deg: float = 12.0
    perspective: float = 6e-5
    scale_jitter: float = 0.06


@dataclass(frozen=True)
class SceneSpec:
    n_views: int = 20
    size: tuple = (256, 256)
    seed: int = 0
    source_index: int | None = None  # default: middle view
    objects: tuple = ()
    camera: CameraSpec = field(default_factory=CameraSpec)
    base_color: tuple = (122, 128, 118)
    noise_amplitude: float = 42.0
    noise_octaves: int = 3
    noise_cell_frac: float = 0.25
    mat_scale: float = 2.4  # mat radius as multiple of object extent
    mat_noise_keep: float = 0.06  # texture amplitude retained deep inside a mat
    mat_gradient: float = 1.6  # linear shading slope inside mats, intensity/px

    def __post_init__(self):
        if self.n_views < 2:
            raise ValidationError("n_views must be >= 2")
        if self.size[0] < 16 or self.size[1] < 16:
            raise ValidationError(f"size {self.size} too small")
        if self.noise_octaves < 3:
            raise ValidationError("noise_octaves must be >= 3 for matchable texture")


def _pose_matrix(theta, w, h) -> Homography:
    angle, tx, ty, scale, px, py = theta
    c, s = np.cos(angle), np.sin(angle)
    core = np.array(
        [
            [scale * c, -scale * s, tx],
            [scale * s, scale * c, ty],
            [px, py, 1.0],
        ]
    )
    t_fwd = np.array([[1, 0, w / 2], [0, 1, h / 2], [0, 0, 1.0]])
    t_back = np.array([[1, 0, -w / 2], [0, 1, -h / 2], [0, 0, 1.0]])
    return Homography.from_matrix(t_fwd @ core @ t_back)


class SyntheticScene:
    """Realized scene: per-view homographies plus procedural plane rendering."""

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        w, h = spec.size
        rng = np.random.default_rng(spec.seed)
        cam = spec.camera
        ends = []
        for _ in range(2):
            ends.append(
                (
                    rng.uniform(-1, 1) * np.deg2rad(cam.rotation_deg) / 2,
                    rng.uniform(-1, 1) * cam.translation_frac * w / 2,
                    rng.uniform(-1, 1) * cam.translation_frac * h / 2,
                    1.0 + rng.uniform(-1, 1) * cam.scale_jitter / 2,
                    rng.uniform(-1, 1) * cam.perspective,
                    rng.uniform(-1, 1) * cam.perspective,
                )
            )
        t0 = np.array(ends[0])
        t1 = np.array(ends[1])
        self.view_from_plane = []
        for j in range(spec.n_views):
            t = j / (spec.n_views - 1)
            self.view_from_plane.append(_pose_matrix((1 - t) * t0 + t * t1, w, h))
        # Per-mat shading direction; fixed per object.
        self._grad_dirs = []
        for _ in spec.objects:
            g = rng.uniform(-1, 1, 2)
            self._grad_dirs.append(g / max(float(np.linalg.norm(g)), 1e-9))

    # -- ground truth --

    @property
    def size(self):
        return self.spec.size

    @property
    def source_index(self) -> int:
        if self.spec.source_index is not None:
            return self.spec.source_index
        return self.spec.n_views // 2

    def gt_pair(self, i: int, j: int) -> Homography:
        """Exact image-i -> image-j homography."""
        return chain(self.view_from_plane[i].inverse(), self.view_from_plane[j])

    def gt_composite(self, i: int, j: int) -> Homography:
        return self.gt_pair(i, j)

    # -- rendering --

    def _plane_coords(self, j: int):
        w, h = self.spec.size
        inv = self.view_from_plane[j].inverse().matrix
        gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        depth = inv[2, 0] * gx + inv[2, 1] * gy + inv[2, 2]
        u = (inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]) / depth
        v = (inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]) / depth
        return u.astype(np.float32), v.astype(np.float32)

    def _background(self, u, v):
        spec = self.spec
        cell = spec.noise_cell_frac * min(spec.size)
        total = np.zeros(u.shape, dtype=np.float32)
        amp_sum = 0.0
        for o in range(spec.noise_octaves):
            amp = 0.5**o
            total += np.float32(amp) * _value_noise(u, v, cell / (2**o), spec.seed + 101 * o)
            amp_sum += amp
        signal = total / np.float32(amp_sum) - np.float32(0.5)

        # Mats: attenuate texture and add a linear shade around each object.
        # Only the nearest object's mat shades a pixel; summing overlapping
        # ramps would curve the field where mats meet, and the diffusion
        # inpainter can only reproduce fields that are harmonic inside a hole.
        keep = np.ones(u.shape, dtype=np.float32)
        shade = np.zeros(u.shape, dtype=np.float32)
        if spec.objects:
            dists = []
            ramps = []
            for obj in spec.objects:
                r_mat = spec.mat_scale * obj.extent_radius()
                d = np.hypot(u - obj.center[0], v - obj.center[1])
                tt = np.clip((d - r_mat) * np.float32(1.0 / (0.4 * r_mat)), 0.0, 1.0)
                ramp = tt * tt * (3 - 2 * tt)  # 0 inside the mat, 1 outside
                dists.append(d * np.float32(1.0 / max(r_mat, 1e-9)))
                ramps.append(ramp)
                keep = np.minimum(
                    keep,
                    np.float32(spec.mat_noise_keep)
                    + np.float32(1 - spec.mat_noise_keep) * ramp,
                )
            nearest = np.argmin(np.stack(dists), axis=0)
            for k, obj in enumerate(spec.objects):
                own = nearest == k
                gx, gy = self._grad_dirs[k]
                local = (1 - ramps[k]) * (
                    np.float32(gx) * (u - obj.center[0])
                    + np.float32(gy) * (v - obj.center[1])
                )
                shade[own] = np.float32(spec.mat_gradient) * local[own]

        lum = signal * np.float32(2 * spec.noise_amplitude) * keep + shade
        weights = np.array([1.0, 0.93, 0.86], dtype=np.float32)
        out = np.asarray(spec.base_color, dtype=np.float32) + lum[..., None] * weights
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)

    def render(self, j: int, with_objects: bool = True) -> np.ndarray:
        u, v = self._plane_coords(j)
        img = self._background(u, v)
        if with_objects:
            for obj in self.spec.objects:
                member = obj.membership(u, v)
                img[member] = np.asarray(obj.color, dtype=np.uint8)
        return img

    def clean(self, j: int) -> np.ndarray:
        return self.render(j, with_objects=False)

    def gt_mask(self, j: int, k: int) -> np.ndarray:
        """Ground-truth mask of object k (1-based) in view j."""
        u, v = self._plane_coords(j)
        return self.spec.objects[k - 1].membership(u, v)

    def render_all(self, j: int):
        """(image, clean, masks) sharing one coordinate evaluation."""
        u, v = self._plane_coords(j)
        clean = self._background(u, v)
        img = clean.copy()
        masks = []
        for obj in self.spec.objects:
            member = obj.membership(u, v)
            img[member] = np.asarray(obj.color, dtype=np.uint8)
            masks.append(member)
        return img, clean, masks


def generate(spec: SceneSpec, out_dir) -> Path:
    """Render a scene to disk; returns the manifest path.

    Layout: manifest.json, views/view_{j}.png, gt/clean/view_{j}.png,
    gt/masks/view_{j}_obj_{k}.png, gt/homographies.json.
    """
    scene = SyntheticScene(spec)
    out = Path(out_dir)
    (out / "views").mkdir(parents=True, exist_ok=True)
    (out / "gt" / "clean").mkdir(parents=True, exist_ok=True)
    (out / "gt" / "masks").mkdir(parents=True, exist_ok=True)

    views = []
    for j in range(spec.n_views):
        img, clean, masks = scene.render_all(j)
        rel = f"views/view_{j}.png"
        save_image(img, out / rel)
        save_image(clean, out / "gt" / "clean" / f"view_{j}.png")
        for k, m in enumerate(masks, start=1):
            save_mask_png(m, out / "gt" / "masks" / f"view_{j}_obj_{k}.png")
        views.append({"image_path": rel, "pose": None})

    pairs = [
        {"i": j, "j": j + 1, "h": list(scene.gt_pair(j, j + 1).as_tuple())}
        for j in range(spec.n_views - 1)
    ]
    (out / "gt" / "homographies.json").write_text(
        json.dumps({"pairs": pairs}, indent=1, sort_keys=True)
    )
    manifest = {
        "views": views,
        "source_index": scene.source_index,
        "n_objects": len(spec.objects),
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest_path


def perturb(scene: SyntheticScene, noise_px: float, outlier_ratio: float, n_points: int = 150, seed: int = 0):
    """Per-adjacent-pair MatchResult stream from the ground-truth homographies."""
    from .oracles import synthetic_exact_matcher

    for i in range(scene.spec.n_views - 1):
        yield synthetic_exact_matcher(
            scene, i, i + 1, n_points, outlier_ratio, noise_px, seed + 7919 * i + i + 1
        )


def spec_from_json(obj: dict) -> SceneSpec:
    """Parse a SceneSpec from a JSON-ish dict (used by the CLI)."""
    objects = []
    for o in obj.get("objects", []):
        objects.append(
            ObjectSpec(
                shape=o["shape"],
                color=tuple(o["color"]),
                center=tuple(o.get("center", (0, 0))),
                radius=float(o.get("radius", 20.0)),
                size=tuple(o.get("size", (40.0, 30.0))),
                vertices=tuple(tuple(p) for p in o.get("vertices", [])),
            )
        )
    camera = CameraSpec(**obj.get("camera", {}))
    kwargs = {
        k: obj[k]
        for k in (
            "n_views",
            "seed",
            "source_index",
            "base_color",
            "noise_amplitude",
            "noise_octaves",
            "noise_cell_frac",
            "mat_scale",
            "mat_noise_keep",
            "mat_gradient",
        )
        if k in obj
    }
    if "size" in obj:
        kwargs["size"] = tuple(obj["size"])
    if "base_color" in kwargs:
        kwargs["base_color"] = tuple(kwargs["base_color"])
    return SceneSpec(objects=tuple(objects), camera=camera, **kwargs)


def standard_scene(
    seed: int = 0,
    n_views: int = 20,
    size=(256, 256),
    n_objects: int = 3,
    source_index=None,
    **overrides,
) -> SceneSpec:
    """Desk-scale test scene: n_objects flat shapes scattered over a textured plane."""
    w, h = size
    rng = np.random.default_rng(seed + 17)
    palette = [
        (203, 52, 48),
        (46, 94, 188),
        (214, 168, 36),
        (120, 46, 158),
        (32, 150, 120),
    ]
    shapes = ["disk", "rectangle", "polygon"]
    slots = [
        (0.30 * w, 0.34 * h),
        (0.68 * w, 0.62 * h),
        (0.62 * w, 0.26 * h),
        (0.30 * w, 0.70 * h),
        (0.50 * w, 0.48 * h),
    ]
    objects = []
    scale = min(w, h)
    for k in range(n_objects):
        cx, cy = slots[k % len(slots)]
        cx += rng.uniform(-0.02, 0.02) * w
        cy += rng.uniform(-0.02, 0.02) * h
        shape = shapes[k % 3]
        color = palette[k % len(palette)]
        if shape == "disk":
            objects.append(
                ObjectSpec("disk", color, (cx, cy), radius=scale * rng.uniform(0.085, 0.105))
            )
        elif shape == "rectangle":
            objects.append(
                ObjectSpec(
                    "rectangle",
                    color,
                    (cx, cy),
                    size=(scale * rng.uniform(0.15, 0.19), scale * rng.uniform(0.12, 0.16)),
                )
            )
        else:
            r = scale * rng.uniform(0.09, 0.11)
            angles = np.linspace(0, 2 * np.pi, 6, endpoint=False) + rng.uniform(-0.3, 0.3, 6)
            verts = tuple(
                (cx + r * np.cos(a) * rng.uniform(0.85, 1.0), cy + r * np.sin(a) * rng.uniform(0.85, 1.0))
                for a in angles
            )
            objects.append(ObjectSpec("polygon", color, (cx, cy), vertices=verts))
    return SceneSpec(
        n_views=n_views,
        size=size,
        seed=seed,
        source_index=source_index,
        objects=tuple(objects),
        **overrides,
    )
