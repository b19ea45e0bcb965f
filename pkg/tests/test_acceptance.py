"""Acceptance criteria, one test per criterion, one printed PASS/FAIL line each.

Run with: pytest tests/test_acceptance.py -v -s
The shared fixtures build three kinds of scenes: the standard desk suite
(3 scenes x 20 views x 3 objects), a 40-view sweep scene, and a 75-view
1920x1080 scene for the scale check.
"""

import dataclasses
import hashlib
import json
import resource
import time
from pathlib import Path

import numpy as np
import pytest

from homer import geometry as G
from homer import metrics as MT
from homer import pipeline as PL
from homer import scenegen as S
from homer.imgio import load_image
from homer.mask import ShapeContextConfig, centroid, iou, load_mask_png
from homer.oracles import OracleSet, SyntheticMatcher
from homer.prompts import PromptSet
from homer.refine import AnchorConfig, anchor_loss

from conftest import random_homography


def check(name, condition, detail=""):
    print(f"\nACCEPTANCE {'PASS' if condition else 'FAIL'}: {name} {detail}")
    assert condition, f"{name}: {detail}"


def centroid_prompts(scene, view_index):
    fg = []
    for k in range(1, len(scene.spec.objects) + 1):
        cx, cy = centroid(scene.gt_mask(view_index, k))
        fg.append((int(cx), int(cy), k))
    return PromptSet(tuple(fg), (), view_index)


def run_scene(spec, root, oracles=None, cfg=None):
    scene = S.SyntheticScene(spec)
    scene_dir = root / "scene"
    manifest = S.generate(spec, scene_dir)
    vs = PL.ViewSet.from_manifest(manifest)
    oracles = oracles or OracleSet.builtin()
    cfg = cfg or PL.PipelineConfig()
    result = PL.run(vs, centroid_prompts(scene, vs.source_index), oracles, cfg, root / "run")
    return scene, scene_dir, root / "run", result


STANDARD_SEEDS = (101, 102, 103)


@pytest.fixture(scope="module")
def standard_suite(tmp_path_factory):
    """3 scenes x 20 views x 3 objects, built-in oracles end to end."""
    runs = []
    for seed in STANDARD_SEEDS:
        spec = S.standard_scene(seed=seed, n_views=20, size=(256, 256), n_objects=3)
        runs.append(run_scene(spec, tmp_path_factory.mktemp(f"std{seed}")))
    return runs


@pytest.fixture(scope="module")
def sweep_runs(tmp_path_factory):
    """One 40-view scene propagated with key-view interval 5, 10, and none."""
    spec = S.standard_scene(seed=5, n_views=40, size=(256, 256), n_objects=2, source_index=0)
    scene = S.SyntheticScene(spec)
    root = tmp_path_factory.mktemp("sweep")
    manifest = S.generate(spec, root / "scene")
    out = {}
    for interval in (5, 10, None):
        vs = PL.ViewSet.from_manifest(manifest)
        oracles = OracleSet.builtin()
        oracles = dataclasses.replace(
            oracles,
            matcher=SyntheticMatcher(scene, n_points=100, outlier_ratio=0.2, noise_px=0.7, seed=21),
        )
        cfg = PL.PipelineConfig(key_view_interval=interval)
        out[interval] = PL.run(
            vs, centroid_prompts(scene, 0), oracles, cfg, root / f"run_{interval}"
        )
    return spec, scene, root, out


@pytest.fixture(scope="module")
def hd_run(tmp_path_factory):
    """20 views at 512x512, built-in oracles, single-threaded, timed."""
    spec = S.standard_scene(seed=201, n_views=20, size=(512, 512), n_objects=3)
    scene = S.SyntheticScene(spec)
    root = tmp_path_factory.mktemp("hd512")
    manifest = S.generate(spec, root / "scene")
    vs = PL.ViewSet.from_manifest(manifest)
    t0 = time.perf_counter()
    result = PL.run(
        vs,
        centroid_prompts(scene, vs.source_index),
        OracleSet.builtin(),
        PL.PipelineConfig(workers=1),
        root / "run",
    )
    elapsed = time.perf_counter() - t0
    return scene, root / "scene", root / "run", result, elapsed


def test_01_homography_recovery():
    """50 seeded trials: 100 points, sigma 0.5 px, 30% outliers, threshold 3 px."""
    t0 = time.perf_counter()
    for trial in range(50):
        rng = np.random.default_rng(5000 + trial)
        h_gt = random_homography(rng)
        src = rng.uniform(10, 246, (100, 2))
        dst = G.apply_points(h_gt, src) + rng.normal(0, 0.5, (100, 2))
        out_idx = rng.choice(100, 30, replace=False)
        dst[out_idx] = rng.uniform(0, 256, (30, 2))
        true_inliers = np.setdiff1d(np.arange(100), out_idx)
        corr = [G.Correspondence(tuple(p), tuple(q)) for p, q in zip(src, dst)]
        res = G.ransac_estimate(
            corr, G.RansacConfig(inlier_threshold_px=3.0, rng_seed=trial)
        )
        assert res.mean_inlier_error_px < 1.0, f"trial {trial}: {res.mean_inlier_error_px}"
        retained = len(set(res.inlier_indices) & set(true_inliers.tolist()))
        assert retained >= 0.95 * len(true_inliers), f"trial {trial}: {retained}/70"
    elapsed = time.perf_counter() - t0
    check(
        "homography recovery (50 trials, error < 1 px, >= 95% inliers kept)",
        elapsed < 5.0,
        f"runtime {elapsed:.2f}s < 5s",
    )


def test_02_warp_fidelity(tmp_path):
    """Estimated homographies move gt masks across adjacent views at IoU >= 0.95."""
    spec = S.standard_scene(seed=7, n_views=20, size=(256, 256), n_objects=3)
    scene = S.SyntheticScene(spec)
    scores = []
    for j in range(spec.n_views - 1):
        from homer.oracles import synthetic_exact_matcher

        match = synthetic_exact_matcher(scene, j, j + 1, 120, 0.2, 0.5, seed=900 + j)
        est = G.ransac_estimate(list(match.correspondences), G.RansacConfig(rng_seed=j))
        for k in range(1, 4):
            warped = G.warp_mask(scene.gt_mask(j, k), est.homography, spec.size)
            scores.append(iou(warped, scene.gt_mask(j + 1, k)))
    mean_iou = float(np.mean(scores))
    check("warp fidelity (mean IoU over 20-view scene)", mean_iou >= 0.95, f"{mean_iou:.4f} >= 0.95")


def test_03_refinement_never_hurts(standard_suite):
    refined, coarse = [], []
    for scene, scene_dir, run_dir, result in standard_suite:
        ev = MT.evaluate_run(run_dir, scene_dir / "gt", write=False)
        evc = MT.evaluate_run(run_dir, scene_dir / "gt", write=False, use_coarse=True)
        refined.append(ev.aggregates["iou"]["mean"])
        coarse.append(evc.aggregates["iou"]["mean"])
    mr, mc = float(np.mean(refined)), float(np.mean(coarse))
    check(
        "refinement never hurts (3 scenes x 20 views x 3 objects)",
        mr >= mc and mr >= 0.90,
        f"refined {mr:.4f} >= coarse {mc:.4f} and >= 0.90",
    )


def _check_conservation(scene_dir, run_dir):
    report = json.loads((Path(run_dir) / "report.json").read_text())
    manifest = json.loads((Path(scene_dir) / "manifest.json").read_text())
    bad = []
    for view in report["views"]:
        j = view["index"]
        original = load_image(Path(scene_dir) / manifest["views"][j]["image_path"])
        output = load_image(Path(run_dir) / view["image_path"])
        union = np.zeros(original.shape[:2], dtype=bool)
        for rel in view["mask_paths"].values():
            union |= load_mask_png(Path(run_dir) / rel)
        if not np.array_equal(output[~union], original[~union]):
            bad.append(j)
    return bad


def test_04_conservation(standard_suite, sweep_runs, hd_run):
    bad = []
    for scene, scene_dir, run_dir, result in standard_suite:
        bad += _check_conservation(scene_dir, run_dir)
    _, _, sweep_root, sweep_out = sweep_runs
    for interval, result in sweep_out.items():
        bad += _check_conservation(sweep_root / "scene", result.out_dir)
    bad += _check_conservation(hd_run[1], hd_run[2])
    check(
        "conservation (pixels outside mask union bit-identical, every run/view)",
        not bad,
        f"checked standard suite + sweep + 512px runs; violations: {bad}",
    )


def test_05_error_accumulation(sweep_runs):
    spec, scene, root, out = sweep_runs
    terminal = spec.n_views - 1
    gt_union = scene.gt_mask(terminal, 1) | scene.gt_mask(terminal, 2)
    clean = scene.clean(terminal)
    psnr = {}
    for interval, result in out.items():
        img = load_image(result.out_dir / f"inpainted/view_{terminal}.png")
        psnr[interval] = MT.psnr(img, clean, region=gt_union)
    ok = psnr[5] >= psnr[10] >= psnr[None] and psnr[5] - psnr[None] >= 1.0
    check(
        "error accumulation (terminal-view PSNR non-increasing in n, n=5 beats n=inf by >= 1 dB)",
        ok,
        f"n=5: {psnr[5]:.2f} dB, n=10: {psnr[10]:.2f} dB, n=inf: {psnr[None]:.2f} dB",
    )


def test_06_end_to_end_quality(standard_suite, hd_run):
    psnrs, ssims = [], []
    for scene, scene_dir, run_dir, result in standard_suite:
        ev = MT.evaluate_run(run_dir, scene_dir / "gt", write=False)
        psnrs.append(ev.aggregates["masked_psnr_db"]["mean"])
        ssims.append(ev.aggregates["ssim"]["mean"])
    mp, ms = float(np.mean(psnrs)), float(np.mean(ssims))
    elapsed = hd_run[4]
    ok = mp >= 25.0 and ms >= 0.90 and elapsed < 60.0
    check(
        "end-to-end quality (masked PSNR >= 25 dB, SSIM >= 0.90, 512px run < 60s)",
        ok,
        f"PSNR {mp:.2f} dB, SSIM {ms:.4f}, 20x512px single-threaded {elapsed:.1f}s",
    )


def test_07_scale_smoke(tmp_path_factory):
    """75 views at 1920x1080: estimation < 30s parallel, run completes, < 8 GB."""
    root = tmp_path_factory.mktemp("scale")
    spec = S.standard_scene(seed=301, n_views=75, size=(1920, 1080), n_objects=1, source_index=0)
    scene = S.SyntheticScene(spec)
    manifest = S.generate(spec, root / "scene")
    vs = PL.ViewSet.from_manifest(manifest)
    cfg = PL.PipelineConfig(
        key_view_interval=20,
        # corner localization after pyramid matching is ~2 px at 1080p, so the
        # consensus threshold scales up with it
        ransac=G.RansacConfig(inlier_threshold_px=6.0, rng_seed=0),
        anchor=AnchorConfig(search_steps=6, prompt_count=6),
        save_coarse=False,
    )
    oracles = OracleSet.builtin(inpaint_iters=600)

    t0 = time.perf_counter()
    estimates = PL.estimate_all(vs, oracles.checked().matcher, cfg)
    t_est = time.perf_counter() - t0
    reliable = sum(e.reliable for e in estimates.values())
    assert len(estimates) == 74

    result = PL.run(vs, centroid_prompts(scene, 0), oracles, cfg, root / "run")
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / (1024**2)
    ok = t_est < 30.0 and peak_gb < 8.0 and len(result.views) == 75
    check(
        "scale smoke (75 views at 1920x1080)",
        ok,
        f"74-pair estimation {t_est:.1f}s < 30s ({reliable}/74 reliable), peak {peak_gb:.2f} GB < 8",
    )


def _tree_digest(root, patterns):
    h = hashlib.sha256()
    root = Path(root)
    for pattern in patterns:
        for p in sorted(root.glob(pattern)):
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_08_determinism(tmp_path):
    spec = S.standard_scene(seed=42, n_views=8, size=(192, 192), n_objects=2)
    scene = S.SyntheticScene(spec)
    manifest = S.generate(spec, tmp_path / "scene")
    digests = []
    for attempt in ("a", "b"):
        vs = PL.ViewSet.from_manifest(manifest)
        result = PL.run(
            vs,
            centroid_prompts(scene, vs.source_index),
            OracleSet.builtin(),
            PL.PipelineConfig(),
            tmp_path / attempt,
        )
        digests.append(
            _tree_digest(tmp_path / attempt, ["masks/*.png", "inpainted/*.png", "report.json"])
        )
    check(
        "determinism (identical seeds give byte-identical masks, images, report)",
        digests[0] == digests[1],
        digests[0][:16],
    )


def test_09_loss_bookkeeping(standard_suite):
    """Reported refine loss must reproduce alpha*(1-IoU) + beta*SC to 1e-9."""
    worst = 0.0
    checked = 0
    for scene, scene_dir, run_dir, result in standard_suite:
        report = json.loads((Path(run_dir) / "report.json").read_text())
        cfg = AnchorConfig(
            alpha=report["config"]["anchor"]["alpha"],
            beta=report["config"]["anchor"]["beta"],
            sc=ShapeContextConfig(**report["config"]["anchor"]["sc"]),
        )
        for view in report["views"]:
            if view["index"] == result.source_index:
                continue
            for k, reported in view["losses"].items():
                refined = load_mask_png(Path(run_dir) / view["mask_paths"][k])
                coarse = load_mask_png(Path(run_dir) / view["coarse_mask_paths"][k])
                if not refined.any() and not coarse.any():
                    recomputed = 0.0
                elif not refined.any() or not coarse.any():
                    continue  # degenerate pairing, loss fixed by convention
                else:
                    recomputed = anchor_loss(refined, coarse, cfg)
                worst = max(worst, abs(recomputed - reported))
                checked += 1
    check(
        "loss bookkeeping (recomputed refine loss within 1e-9)",
        checked > 0 and worst <= 1e-9,
        f"{checked} masks, worst |delta| {worst:.2e}",
    )
