"""Quality metrics (PSNR, SSIM, mask IoU) and run-vs-ground-truth evaluation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, EmptyRegion, MissingGroundTruth, TooSmall
from .imgio import load_image, to_gray
from .mask import iou, load_mask_png

PSNR_CAP_DB = 99.0


def psnr(a, b, region=None) -> float:
    """10*log10(255^2 / MSE), capped at 99 dB so identical inputs stay sortable."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    sq = (a - b) ** 2
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if region.shape != a.shape[:2]:
            raise DimensionMismatch(f"region {region.shape} vs image {a.shape[:2]}")
        if not region.any():
            raise EmptyRegion("empty PSNR region")
        sq = sq[region]
    mse = float(sq.mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(255.0**2 / mse), PSNR_CAP_DB)


def ssim(a, b) -> float:
    """Mean local SSIM on luma; 11x11 Gaussian window (sigma 1.5), standard
    stabilizers C1=(0.01*255)^2, C2=(0.03*255)^2."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if min(a.shape[0], a.shape[1]) < 11:
        raise TooSmall("images must be at least 11x11")
    x = to_gray(a)
    y = to_gray(b)
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    # truncate=10/3 gives a 5-pixel kernel radius: an 11-tap window.
    blur = lambda m: ndimage.gaussian_filter(m, 1.5, truncate=10.0 / 3.0, mode="reflect")
    mx = blur(x)
    my = blur(y)
    mxx = blur(x * x)
    myy = blur(y * y)
    mxy = blur(x * y)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float((num / den).mean())


@dataclass
class EvalReport:
    per_view: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    missing: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "per_view": self.per_view,
            "aggregates": self.aggregates,
            "config": self.config,
            "missing": self.missing,
        }


def _aggregate(per_view, key):
    vals = [v[key] for v in per_view if v.get(key) is not None]
    if not vals:
        return {"mean": None, "min": None}
    return {"mean": float(np.mean(vals)), "min": float(np.min(vals))}


def evaluate_run(run_dir, gt_dir, write: bool = True, use_coarse: bool = False) -> EvalReport:
    """Score a pipeline run against a scene's gt/ directory.

    Per view: per-object IoU against ground-truth masks, whole-frame PSNR/SSIM
    against the clean plate, and PSNR over the union of ground-truth masks
    (where removal actually had to synthesize content).
    """
    run_dir = Path(run_dir)
    gt_dir = Path(gt_dir)
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise MissingGroundTruth(f"no report.json in {run_dir}")
    report = json.loads(report_path.read_text())

    per_view = []
    missing = []
    for view in report["views"]:
        j = view["index"]
        clean_path = gt_dir / "clean" / f"view_{j}.png"
        if not clean_path.exists():
            missing.append(f"view {j}: no clean plate {clean_path}")
            continue
        clean = load_image(clean_path)
        inpainted = load_image(run_dir / view["image_path"])
        entry = {"index": j, "provenance": view["provenance"]}

        mask_key = "coarse_mask_paths" if use_coarse else "mask_paths"
        gt_union = np.zeros(clean.shape[:2], dtype=bool)
        ious = {}
        for k, rel in sorted(view[mask_key].items(), key=lambda kv: int(kv[0])):
            gt_mask_path = gt_dir / "masks" / f"view_{j}_obj_{k}.png"
            if not gt_mask_path.exists():
                missing.append(f"view {j}: no gt mask {gt_mask_path}")
                continue
            gt_mask = load_mask_png(gt_mask_path)
            got = load_mask_png(run_dir / rel)
            ious[k] = iou(got, gt_mask)
            gt_union |= gt_mask
        entry["iou"] = ious
        entry["iou_mean"] = float(np.mean(list(ious.values()))) if ious else None
        entry["psnr_db"] = psnr(inpainted, clean)
        entry["ssim"] = ssim(inpainted, clean)
        entry["masked_psnr_db"] = (
            psnr(inpainted, clean, region=gt_union) if gt_union.any() else None
        )
        per_view.append(entry)

    out = EvalReport(
        per_view=per_view,
        aggregates={
            "iou": _aggregate(per_view, "iou_mean"),
            "psnr_db": _aggregate(per_view, "psnr_db"),
            "ssim": _aggregate(per_view, "ssim"),
            "masked_psnr_db": _aggregate(per_view, "masked_psnr_db"),
        },
        config={"run_dir": str(run_dir), "gt_dir": str(gt_dir), "use_coarse": use_coarse},
        missing=missing,
    )
    if write:
        (run_dir / "eval.json").write_text(json.dumps(out.to_json(), indent=1, sort_keys=True))
        _write_csv(run_dir / "eval.csv", per_view)
    return out


def _write_csv(path, per_view) -> None:
    if not per_view:
        Path(path).write_text("")
        return
    obj_ids = sorted({k for v in per_view for k in v["iou"]}, key=int)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "provenance"]
            + [f"iou_{k}" for k in obj_ids]
            + ["psnr_db", "masked_psnr_db", "ssim"]
        )
        for v in per_view:
            writer.writerow(
                [v["index"], v["provenance"]]
                + [v["iou"].get(k, "") for k in obj_ids]
                + [v["psnr_db"], v["masked_psnr_db"], v["ssim"]]
            )
