"""Interaction stage: user point prompts -> per-object masks -> inpainted source.

Foreground points carry an explicit object id (contiguous 1..K); background
points are shared across objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mask import as_mask


@dataclass(frozen=True)
class PromptSet:
    foreground: tuple  # ((x, y, object_id), ...)
    background: tuple  # ((x, y), ...)
    view_index: int = 0

    @property
    def object_ids(self) -> tuple:
        return tuple(sorted({int(p[2]) for p in self.foreground}))

    def validate(self, image_size=None) -> None:
        if not self.foreground:
            raise ValidationError("need at least one foreground point")
        ids = self.object_ids
        if ids != tuple(range(1, len(ids) + 1)):
            raise ValidationError(f"object ids must be contiguous 1..K, got {ids}")
        if image_size is not None:
            w, h = image_size
            for x, y, _ in self.foreground:
                if not (0 <= x < w and 0 <= y < h):
                    raise ValidationError(f"foreground point ({x},{y}) outside {w}x{h}")
            for x, y in self.background:
                if not (0 <= x < w and 0 <= y < h):
                    raise ValidationError(f"background point ({x},{y}) outside {w}x{h}")

    def foreground_for(self, object_id: int) -> list:
        return [(p[0], p[1]) for p in self.foreground if int(p[2]) == object_id]

    def to_json(self) -> dict:
        return {
            "view_index": self.view_index,
            "foreground": [
                {"x": int(x), "y": int(y), "object_id": int(k)}
                for x, y, k in self.foreground
            ],
            "background": [{"x": int(x), "y": int(y)} for x, y in self.background],
        }

    @staticmethod
    def from_json(obj: dict) -> "PromptSet":
        try:
            fg = tuple(
                (int(p["x"]), int(p["y"]), int(p["object_id"]))
                for p in obj.get("foreground", [])
            )
            bg = tuple((int(p["x"]), int(p["y"])) for p in obj.get("background", []))
            return PromptSet(fg, bg, int(obj.get("view_index", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed prompt set: {exc}") from exc


@dataclass(frozen=True)
class InteractionResult:
    masks: tuple  # per object, id order
    inpainted_source: np.ndarray
    mode: str  # "sequential" | "merged"


def segment_objects(image, prompts: PromptSet, seg) -> list:
    """One segmenter call per object id, shared background points."""
    image = np.asarray(image)
    h, w = image.shape[:2]
    prompts.validate((w, h))
    masks = []
    for object_id in prompts.object_ids:
        fg = prompts.foreground_for(object_id)
        try:
            masks.append(as_mask(seg.segment(image, fg, list(prompts.background))))
        except Exception as exc:
            raise type(exc)(f"object {object_id}: {exc}") from exc
    return masks


def inpaint_sequential(image, masks, inp) -> np.ndarray:
    """Fold the inpainter over the masks in order; exactly len(masks) calls."""
    out = np.asarray(image)
    for i, m in enumerate(masks, start=1):
        try:
            out = inp.inpaint(out, as_mask(m))
        except Exception as exc:
            raise type(exc)(f"inpaint step {i}: {exc}") from exc
    return out


def inpaint_merged(image, masks, inp) -> np.ndarray:
    """Single inpainter call on the union of all masks."""
    image = np.asarray(image)
    if not masks:
        return image.copy()
    union = np.zeros(image.shape[:2], dtype=bool)
    for m in masks:
        union |= as_mask(m)
    if not union.any():
        return image.copy()
    return inp.inpaint(image, union)


def choose_inpaint_mode(masks) -> str:
    """Merged for many or overlapping objects, else sequential."""
    if len(masks) >= 4:
        return "merged"
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            if (masks[i] & masks[j]).any():
                return "merged"
    return "sequential"


def run_interaction(image, prompts: PromptSet, seg, inp, mode: str | None = None) -> InteractionResult:
    """Full interaction stage: segmentation then source-view inpainting."""
    masks = segment_objects(image, prompts, seg)
    if mode is None:
        mode = choose_inpaint_mode(masks)
    if mode == "sequential":
        inpainted = inpaint_sequential(image, masks, inp)
    elif mode == "merged":
        inpainted = inpaint_merged(image, masks, inp)
    else:
        raise ValidationError(f"unknown inpaint mode {mode!r}")
    return InteractionResult(tuple(masks), inpainted, mode)
