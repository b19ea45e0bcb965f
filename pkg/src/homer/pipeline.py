"""End-to-end orchestration: interaction -> pair homographies -> mask
propagation -> warp-based inpainting with key-view resets -> on-disk outputs.

Propagation walks outward from the source view along two chains (toward the
last view and toward the first), so any view can be the annotated one. Each
hop warps the previous view's refined masks and inpainted content; every n-th
view on a chain is a key view whose mask region is re-inpainted directly from
that view to stop warping error from accumulating.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    HomerError,
    NoConsensus,
    PipelineAbort,
    TooFewCorrespondences,
    ValidationError,
)
from .geometry import Homography, RansacConfig, RansacResult, ransac_estimate, warp_image, warp_mask
from .imgio import load_image, save_image
from .mask import area, save_mask_png
from .oracles import OracleSet
from .prompts import PromptSet, run_interaction
from .refine import AnchorConfig, refine_mask

log = logging.getLogger(__name__)


class ViewSet:
    """Ordered multi-view collection; entries are arrays or image paths."""

    def __init__(self, views, poses=None, source_index: int = 0):
        if len(views) < 2:
            raise ValidationError(f"need at least 2 views, got {len(views)}")
        self.views = list(views)
        self.poses = list(poses) if poses is not None else [None] * len(views)
        if len(self.poses) != len(views):
            raise ValidationError("poses length must match views")
        if not (0 <= source_index < len(views)):
            raise ValidationError(f"source_index {source_index} out of range")
        self.source_index = source_index
        self._cache = {}
        self._cache_lock = threading.Lock()
        self._size = None

    @staticmethod
    def from_manifest(path) -> "ViewSet":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
        views = []
        poses = []
        for entry in obj.get("views", []):
            views.append(str((path.parent / entry["image_path"]).resolve()))
            poses.append(entry.get("pose"))
        if not views:
            raise ValidationError(f"manifest {path} lists no views")
        return ViewSet(views, poses, int(obj.get("source_index", 0)))

    @property
    def n_views(self) -> int:
        return len(self.views)

    def load(self, j: int) -> np.ndarray:
        v = self.views[j]
        if isinstance(v, np.ndarray):
            return v
        with self._cache_lock:
            if j in self._cache:
                return self._cache[j]
        img = load_image(v)  # decode outside the lock
        with self._cache_lock:
            while len(self._cache) >= 6:
                self._cache.pop(next(iter(self._cache)))
            self._cache[j] = img
        return img

    @property
    def size(self) -> tuple:
        """(W, H), shared by all views."""
        if self._size is None:
            img = self.load(0)
            self._size = (img.shape[1], img.shape[0])
        return self._size

    def validate_dimensions(self) -> None:
        w, h = self.size
        for j in range(self.n_views):
            img = self.load(j)
            if (img.shape[1], img.shape[0]) != (w, h):
                raise ValidationError(
                    f"view {j} is {img.shape[1]}x{img.shape[0]}, expected {w}x{h}"
                )


@dataclass(frozen=True)
class PipelineConfig:
    key_view_interval: int | None = 10  # None: never reset at key views
    ransac: RansacConfig = field(default_factory=RansacConfig)
    anchor: AnchorConfig = field(default_factory=AnchorConfig)
    inpaint_mode: str | None = None  # None: pick per interaction heuristics
    min_pair_similarity: float = 0.05
    empty_fill_threshold: float = 0.6
    workers: int | None = None  # parallel pair estimation; None: auto
    save_coarse: bool = True
    refine_enabled: bool = True

    def __post_init__(self):
        if self.key_view_interval is not None and self.key_view_interval < 1:
            raise ValidationError("key_view_interval must be >= 1")
        if not (0 <= self.min_pair_similarity <= 1):
            raise ValidationError("min_pair_similarity must be in [0,1]")
        if not (0 <= self.empty_fill_threshold <= 1):
            raise ValidationError("empty_fill_threshold must be in [0,1]")


@dataclass
class PairEstimate:
    i: int
    j: int
    similarity: float
    result: RansacResult | None
    reliable: bool
    error: str | None = None

    def hop(self) -> Homography:
        return self.result.homography if self.reliable else Homography.identity()


@dataclass
class ViewOutput:
    index: int
    provenance: str  # source | warped | key_view | degraded
    image_path: str | None = None
    mask_paths: dict = field(default_factory=dict)
    coarse_mask_paths: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)
    radii: dict = field(default_factory=dict)
    degraded_reasons: list = field(default_factory=list)


@dataclass
class PropagationResult:
    out_dir: Path
    source_index: int
    n_objects: int
    views: list
    pairs: dict
    report: dict
    timings: dict

    def view(self, j: int) -> ViewOutput:
        return self.views[j]

    def load_image(self, j: int) -> np.ndarray:
        return load_image(self.out_dir / self.views[j].image_path)

    def load_mask(self, j: int, k: int) -> np.ndarray:
        from .mask import load_mask_png

        return load_mask_png(self.out_dir / self.views[j].mask_paths[k])

    def load_coarse_mask(self, j: int, k: int) -> np.ndarray:
        from .mask import load_mask_png

        return load_mask_png(self.out_dir / self.views[j].coarse_mask_paths[k])

    @property
    def degraded_views(self) -> list:
        return [v.index for v in self.views if v.provenance == "degraded"]


def plan_pairs(vs: ViewSet) -> list:
    """N_v - 1 adjacent pairs, oriented outward from the source view."""
    s = vs.source_index
    forward = [(i, i + 1) for i in range(s, vs.n_views - 1)]
    backward = [(i, i - 1) for i in range(s, 0, -1)]
    return forward + backward


def _estimate_pair(vs, matcher, cfg: PipelineConfig, pair) -> PairEstimate:
    i, j = pair
    try:
        match = matcher.match_views(vs, i, j)
    except HomerError as exc:
        log.warning("pair (%d,%d): matcher failed: %s", i, j, exc)
        return PairEstimate(i, j, 0.0, None, False, error=f"matcher: {exc}")
    if match.similarity < cfg.min_pair_similarity:
        return PairEstimate(
            i, j, match.similarity, None, False,
            error=f"similarity {match.similarity:.3f} below {cfg.min_pair_similarity}",
        )
    pair_cfg = dataclasses.replace(
        cfg.ransac, rng_seed=cfg.ransac.rng_seed + 1000003 * i + j
    )
    try:
        result = ransac_estimate(list(match.correspondences), pair_cfg)
    except (NoConsensus, TooFewCorrespondences, HomerError) as exc:
        log.warning("pair (%d,%d): estimation failed: %s", i, j, exc)
        return PairEstimate(i, j, match.similarity, None, False, error=f"ransac: {exc}")
    return PairEstimate(i, j, match.similarity, result, True)


def estimate_all(vs: ViewSet, matcher, cfg: PipelineConfig) -> dict:
    """Estimate homographies for all planned pairs; failures flag, not abort."""
    pairs = plan_pairs(vs)
    serial = not getattr(matcher, "concurrent_safe", True) or cfg.workers == 1
    if serial:
        estimates = [_estimate_pair(vs, matcher, cfg, p) for p in pairs]
    else:
        workers = cfg.workers or min(8, os.cpu_count() or 2)
        # contiguous chunks keep each worker on neighboring views, so the
        # view cache is not thrashed by interleaved loads
        chunk = max(1, math.ceil(len(pairs) / workers))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(
                pool.map(lambda p: _estimate_pair(vs, matcher, cfg, p), pairs, chunksize=chunk)
            )
    out = {(e.i, e.j): e for e in estimates}

    s = vs.source_index
    source_pairs = [p for p in ((s, s + 1), (s, s - 1)) if p in out]
    if source_pairs and not any(out[p].reliable for p in source_pairs):
        raise PipelineAbort(
            f"source view {s} has no reliable neighbor: "
            + "; ".join(str(out[p].error) for p in source_pairs)
        )
    return out


def _chains(vs: ViewSet):
    s = vs.source_index
    return [list(range(s + 1, vs.n_views)), list(range(s - 1, -1, -1))]


def propagate_masks(vs: ViewSet, interaction, estimates: dict, segmenter, cfg: PipelineConfig, progress_cb=None):
    """Warp refined masks outward hop by hop, refining at every view.

    Returns (masks, coarse, info) where masks[j][k] is the refined mask of
    object k+1 in view j and info[j] carries losses/radii/degradation notes.
    """
    n = vs.n_views
    done = 0
    k_obj = len(interaction.masks)
    masks = [None] * n
    coarse_all = [None] * n
    info = [
        {"losses": {}, "radii": {}, "degraded": False, "reasons": []} for _ in range(n)
    ]
    s = vs.source_index
    masks[s] = [np.asarray(m, dtype=bool) for m in interaction.masks]
    coarse_all[s] = masks[s]

    for chain_views in _chains(vs):
        prev = s
        chain_degraded = False
        for j in chain_views:
            est = estimates[(prev, j)]
            if not est.reliable:
                chain_degraded = True
                info[j]["reasons"].append(f"pair ({prev},{j}) unreliable: {est.error}")
            hop = est.hop()
            view_img = vs.load(j) if cfg.refine_enabled else None
            coarse = [warp_mask(masks[prev][k], hop, vs.size) for k in range(k_obj)]
            refined = []
            for k in range(k_obj):
                if not cfg.refine_enabled:
                    refined.append(coarse[k])
                    info[j]["losses"][k + 1] = 0.0
                    info[j]["radii"][k + 1] = 0.0
                    continue
                try:
                    outcome = refine_mask(view_img, coarse[k], [], segmenter, cfg.anchor)
                except HomerError as exc:
                    log.warning("view %d obj %d: refinement failed: %s", j, k + 1, exc)
                    info[j]["reasons"].append(f"object {k + 1} refine: {exc}")
                    refined.append(coarse[k])
                    info[j]["losses"][k + 1] = 0.0
                    info[j]["radii"][k + 1] = 0.0
                    info[j]["degraded"] = True
                    continue
                if outcome.degraded:
                    info[j]["reasons"].append(
                        f"object {k + 1} refine rejected (loss above threshold)"
                    )
                    info[j]["degraded"] = True
                refined.append(outcome.refined_mask)
                info[j]["losses"][k + 1] = outcome.loss
                info[j]["radii"][k + 1] = outcome.radius
            if chain_degraded:
                info[j]["degraded"] = True
            masks[j] = refined
            coarse_all[j] = coarse
            prev = j
            done += 1
            if progress_cb is not None:
                progress_cb("masks", done, n - 1)
    return masks, coarse_all, info


def propagate_inpaint(vs: ViewSet, interaction, masks, estimates: dict, inpainter, cfg: PipelineConfig, progress_cb=None):
    """Fill mask regions by warping the previous view's result; inpaint holes.

    Key views (every cfg.key_view_interval hops from the source) ignore warped
    content and re-inpaint their whole mask region from the view itself.
    Returns (images, provenance, info_updates).
    """
    n = vs.n_views
    done = 0
    images = [None] * n
    provenance = [None] * n
    notes = [[] for _ in range(n)]
    s = vs.source_index
    images[s] = interaction.inpainted_source
    provenance[s] = "source"
    interval = cfg.key_view_interval

    def direct_inpaint(out, view_original, mk):
        out[mk] = view_original[mk]
        return inpainter.inpaint(out, mk)

    for chain_views in _chains(vs):
        prev = s
        prev_img = images[s]
        for dist, j in enumerate(chain_views, start=1):
            est = estimates[(prev, j)]
            hop = est.hop()
            original = vs.load(j)
            out = original.copy()
            is_key = interval is not None and dist % interval == 0
            provenance[j] = "key_view" if is_key else "warped"
            warped = validity = None
            if not is_key:
                warped, validity = warp_image(prev_img, hop, vs.size)
            for k, mk in enumerate(masks[j], start=1):
                mk = np.asarray(mk, dtype=bool)
                mask_px = area(mk)
                if mask_px == 0:
                    continue
                try:
                    if is_key:
                        out = direct_inpaint(out, original, mk)
                        continue
                    fill = mk & validity
                    out[fill] = warped[fill]
                    empty = mk & ~validity
                    if area(empty) / mask_px > cfg.empty_fill_threshold:
                        notes[j].append(
                            f"object {k}: warped coverage too low, re-inpainted directly"
                        )
                        out = direct_inpaint(out, original, mk)
                    elif empty.any():
                        out = inpainter.inpaint(out, empty)
                except HomerError as exc:
                    log.warning("view %d obj %d: inpaint failed: %s", j, k, exc)
                    try:
                        out = direct_inpaint(out, original, mk)
                        notes[j].append(f"object {k}: fell back to direct inpaint: {exc}")
                    except HomerError as exc2:
                        out[mk] = original[mk]
                        notes[j].append(f"object {k}: inpainting failed, kept input: {exc2}")
                        provenance[j] = "degraded"
            images[j] = out
            prev_img = out
            prev = j
            done += 1
            if progress_cb is not None:
                progress_cb("inpaint", done, n - 1)
    return images, provenance, notes


def run(vs: ViewSet, prompt_set: PromptSet, oracles: OracleSet, cfg: PipelineConfig, out_dir, progress_cb=None) -> PropagationResult:
    """Full pipeline; writes masks, inpainted views, report, and export manifest."""
    timings = {}
    t0 = time.monotonic()
    out_dir = Path(out_dir)
    checked = oracles.checked()
    notify = progress_cb or (lambda stage, done, total: None)

    source = prompt_set.view_index
    if not (0 <= source < vs.n_views):
        raise ValidationError(
            f"prompt view_index {source} out of range for {vs.n_views} views"
        )
    vs.source_index = source
    prompt_set.validate(vs.size)

    log.info("interaction: %d objects on view %d", len(prompt_set.object_ids), source)
    notify("interaction", 0, vs.n_views)
    interaction = run_interaction(
        vs.load(source), prompt_set, checked.segmenter, checked.inpainter, cfg.inpaint_mode
    )
    timings["interaction_s"] = time.monotonic() - t0

    t1 = time.monotonic()
    notify("estimation", 0, vs.n_views)
    estimates = estimate_all(vs, checked.matcher, cfg)
    timings["estimation_s"] = time.monotonic() - t1

    t2 = time.monotonic()
    masks, coarse, mask_info = propagate_masks(
        vs, interaction, estimates, checked.segmenter, cfg, progress_cb=notify
    )
    timings["mask_propagation_s"] = time.monotonic() - t2

    t3 = time.monotonic()
    images, provenance, inpaint_notes = propagate_inpaint(
        vs, interaction, masks, estimates, checked.inpainter, cfg, progress_cb=notify
    )
    timings["inpainting_s"] = time.monotonic() - t3

    t4 = time.monotonic()
    k_obj = len(interaction.masks)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    (out_dir / "inpainted").mkdir(exist_ok=True)
    (out_dir / "export").mkdir(exist_ok=True)

    views_out = []
    export_views = []
    for j in range(vs.n_views):
        vo = ViewOutput(index=j, provenance=provenance[j])
        vo.losses = mask_info[j]["losses"]
        vo.radii = mask_info[j]["radii"]
        vo.degraded_reasons = mask_info[j]["reasons"] + inpaint_notes[j]
        if mask_info[j]["degraded"] or provenance[j] == "degraded":
            vo.provenance = "degraded"
        if j == vs.source_index:
            vo.provenance = "source"
        for k in range(1, k_obj + 1):
            rel = f"masks/view_{j}_obj_{k}.png"
            save_mask_png(masks[j][k - 1], out_dir / rel)
            vo.mask_paths[k] = rel
            if cfg.save_coarse:
                rel_c = f"masks/coarse_view_{j}_obj_{k}.png"
                save_mask_png(coarse[j][k - 1], out_dir / rel_c)
                vo.coarse_mask_paths[k] = rel_c
        rel_img = f"inpainted/view_{j}.png"
        save_image(images[j], out_dir / rel_img)
        vo.image_path = rel_img
        views_out.append(vo)
        export_views.append(
            {"index": j, "image_path": f"../{rel_img}", "pose": vs.poses[j]}
        )
    timings["write_s"] = time.monotonic() - t4
    timings["total_s"] = time.monotonic() - t0

    report = {
        "n_views": vs.n_views,
        "source_index": vs.source_index,
        "n_objects": k_obj,
        "inpaint_mode": interaction.mode,
        "config": _config_json(cfg),
        "pairs": [
            {
                "i": e.i,
                "j": e.j,
                "similarity": round(e.similarity, 6),
                "reliable": e.reliable,
                "error": e.error,
                "inliers": len(e.result.inlier_indices) if e.result else 0,
                "total": e.result.total_correspondences if e.result else 0,
                "mean_inlier_error_px": e.result.mean_inlier_error_px if e.result else None,
                "iterations": e.result.iterations_used if e.result else 0,
                "h": list(e.result.homography.as_tuple()) if e.result else None,
            }
            for e in (estimates[p] for p in plan_pairs(vs))
        ],
        "views": [
            {
                "index": vo.index,
                "provenance": vo.provenance,
                "image_path": vo.image_path,
                "mask_paths": {str(k): p for k, p in vo.mask_paths.items()},
                "coarse_mask_paths": {str(k): p for k, p in vo.coarse_mask_paths.items()},
                "losses": {str(k): v for k, v in vo.losses.items()},
                "radii": {str(k): v for k, v in vo.radii.items()},
                "degraded_reasons": vo.degraded_reasons,
            }
            for vo in views_out
        ],
        "degraded_views": [vo.index for vo in views_out if vo.provenance == "degraded"],
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True))
    # Wall-clock goes in a sidecar so report.json stays byte-reproducible.
    (out_dir / "timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True))
    (out_dir / "export" / "manifest.json").write_text(
        json.dumps(
            {"views": export_views, "source_index": vs.source_index},
            indent=1,
            sort_keys=True,
        )
    )
    return PropagationResult(
        out_dir=out_dir,
        source_index=vs.source_index,
        n_objects=k_obj,
        views=views_out,
        pairs=estimates,
        report=report,
        timings=timings,
    )


def _config_json(cfg: PipelineConfig) -> dict:
    return {
        "key_view_interval": cfg.key_view_interval,
        "min_pair_similarity": cfg.min_pair_similarity,
        "empty_fill_threshold": cfg.empty_fill_threshold,
        "inpaint_mode": cfg.inpaint_mode,
        "refine_enabled": cfg.refine_enabled,
        "save_coarse": cfg.save_coarse,
        "ransac": dataclasses.asdict(cfg.ransac),
        "anchor": {
            "alpha": cfg.anchor.alpha,
            "beta": cfg.anchor.beta,
            "prompt_count": cfg.anchor.prompt_count,
            "r_min_px": cfg.anchor.r_min_px,
            "r_max_px": cfg.anchor.r_max_px,
            "search_steps": cfg.anchor.search_steps,
            "rejection_loss": cfg.anchor.rejection_loss,
            "sc": dataclasses.asdict(cfg.anchor.sc),
        },
    }


def config_from_json(obj: dict) -> PipelineConfig:
    """Build a PipelineConfig from a JSON dict; unknown keys are rejected."""
    from .mask import ShapeContextConfig

    obj = dict(obj)
    kwargs = {}
    if "ransac" in obj:
        kwargs["ransac"] = RansacConfig(**obj.pop("ransac"))
    if "anchor" in obj:
        anchor = dict(obj.pop("anchor"))
        if "sc" in anchor:
            anchor["sc"] = ShapeContextConfig(**anchor["sc"])
        kwargs["anchor"] = AnchorConfig(**anchor)
    interval = obj.pop("key_view_interval", "default")
    if interval != "default":
        if interval in (None, "inf", "infinity"):
            kwargs["key_view_interval"] = None
        else:
            kwargs["key_view_interval"] = int(interval)
    allowed = {
        "inpaint_mode",
        "min_pair_similarity",
        "empty_fill_threshold",
        "workers",
        "save_coarse",
        "refine_enabled",
    }
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(obj)
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad config: {exc}") from exc
