"""Adaptive anchor-circle mask refinement.

A coarse warped mask seeds an anchor circle at its centroid; circle points
prompt the segmenter, and the circle radius is tuned by a golden-section
search against a dual loss: alpha * (1 - IoU) + beta * shape-context distance,
both measured between the candidate mask and the coarse mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMask, SegmenterFailed
from .mask import ShapeContextConfig, area, as_mask, centroid, iou, shape_context_distance

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AnchorConfig:
    alpha: float = 1.0
    beta: float = 0.5
    prompt_count: int = 8
    r_min_px: float = 2.0
    r_max_px: float | None = None  # None: 1.5 * equivalent radius of the coarse mask
    search_steps: int = 12
    rejection_loss: float = 0.8
    sc: ShapeContextConfig = field(default_factory=ShapeContextConfig)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("need alpha, beta >= 0 with alpha + beta > 0")
        if self.prompt_count < 1:
            raise ValueError("prompt_count must be >= 1")
        if self.search_steps < 2:
            raise ValueError("search_steps must be >= 2")
        if self.r_max_px is not None and self.r_min_px >= self.r_max_px:
            raise ValueError("r_min_px must be < r_max_px")


@dataclass(frozen=True)
class RefineOutcome:
    refined_mask: np.ndarray
    radius: float
    loss: float
    candidates_evaluated: int
    degraded: bool = False


def circle_prompts(center, r: float, count: int, image_size) -> list:
    """Center plus count points on the radius-r circle, clamped and deduplicated."""
    w, h = int(image_size[0]), int(image_size[1])
    cx, cy = float(center[0]), float(center[1])
    pts = [(cx, cy)]
    for j in range(count):
        ang = 2.0 * math.pi * j / count
        pts.append((cx + r * math.cos(ang), cy + r * math.sin(ang)))
    out = []
    seen = set()
    for x, y in pts:
        px = min(max(int(round(x)), 0), w - 1)
        py = min(max(int(round(y)), 0), h - 1)
        if (px, py) not in seen:
            seen.add((px, py))
            out.append((px, py))
    return out


def anchor_loss(candidate, coarse, cfg: AnchorConfig) -> float:
    """alpha * (1 - IoU) + beta * SC between a candidate and the coarse mask."""
    candidate = as_mask(candidate)
    coarse = as_mask(coarse)
    term = cfg.alpha * (1.0 - iou(candidate, coarse))
    if cfg.beta > 0:
        term += cfg.beta * shape_context_distance(candidate, coarse, cfg.sc)
    return term


def refine_mask(view_image, coarse, bg_points, seg, cfg: AnchorConfig) -> RefineOutcome:
    """Golden-section search on the anchor radius; returns the minimum-loss mask.

    An empty coarse mask short-circuits to an empty refined mask (the object is
    out of frame in this view). If even the best candidate's loss exceeds
    cfg.rejection_loss, the coarse mask is kept and flagged degraded.
    """
    view_image = np.asarray(view_image)
    coarse = as_mask(coarse)
    h, w = coarse.shape
    if not coarse.any():
        return RefineOutcome(coarse.copy(), 0.0, 0.0, 0)

    center = centroid(coarse)
    r_min = cfg.r_min_px
    r_max = cfg.r_max_px
    if r_max is None:
        r_max = 1.5 * math.sqrt(area(coarse) / math.pi)
    if r_max <= r_min:
        r_max = r_min + 1.0

    bg = [(int(p[0]), int(p[1])) for p in bg_points]
    memo = {}
    errors = []

    def evaluate(r: float):
        prompts = tuple(circle_prompts(center, r, cfg.prompt_count, (w, h)))
        if prompts in memo:
            return memo[prompts]
        try:
            cand = as_mask(seg.segment(view_image, list(prompts), bg))
            if not cand.any():
                raise EmptyMask("segmenter returned an empty mask")
            result = (anchor_loss(cand, coarse, cfg), cand)
        except Exception as exc:  # failed candidate: searchable but never selected
            errors.append(exc)
            result = (math.inf, None)
        memo[prompts] = result
        return result

    candidates = []

    def record(r: float):
        loss, cand = evaluate(r)
        candidates.append((loss, r, cand))
        return loss

    a, b = r_min, r_max
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1 = record(x1)
    f2 = record(x2)
    steps = 2
    while steps < cfg.search_steps:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = record(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = record(x2)
        steps += 1

    viable = [(loss, r, cand) for loss, r, cand in candidates if cand is not None]
    if not viable:
        raise SegmenterFailed(
            f"all {len(candidates)} anchor candidates failed; last: {errors[-1] if errors else 'n/a'}"
        )
    best_loss, best_r, best_mask = min(viable, key=lambda t: (t[0], t[1]))
    if best_loss > cfg.rejection_loss:
        # Keep the coarse mask; its self-loss is exactly 0 by construction.
        return RefineOutcome(coarse.copy(), best_r, 0.0, len(candidates), degraded=True)
    return RefineOutcome(best_mask, best_r, best_loss, len(candidates))
