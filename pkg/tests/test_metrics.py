import numpy as np
import pytest

from homer import metrics as MT
from homer.errors import DimensionMismatch, EmptyRegion, TooSmall


def test_psnr_identical_capped(rng):
    img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    assert MT.psnr(img, img) == 99.0


def test_psnr_unit_offset_closed_form(rng):
    a = rng.integers(0, 255, (64, 64, 3), dtype=np.uint8)
    b = a + 1  # MSE exactly 1
    assert MT.psnr(a, b) == pytest.approx(10 * np.log10(255.0**2), abs=1e-9)
    assert MT.psnr(a, b) == pytest.approx(48.1308, abs=1e-3)


def test_psnr_single_pixel_max_error():
    a = np.zeros((16, 16, 3), np.uint8)
    b = a.copy()
    b[4, 5] = 255
    region = np.zeros((16, 16), bool)
    region[4, 5] = True
    assert MT.psnr(a, b, region=region) == pytest.approx(0.0, abs=1e-12)


def test_psnr_region_equals_whole_frame_when_full():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
    b = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
    full = np.ones((24, 24), bool)
    assert MT.psnr(a, b, region=full) == MT.psnr(a, b)


def test_psnr_symmetry_and_errors(rng):
    a = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    b = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    assert MT.psnr(a, b) == MT.psnr(b, a)
    with pytest.raises(DimensionMismatch):
        MT.psnr(a, b[:8])
    with pytest.raises(EmptyRegion):
        MT.psnr(a, b, region=np.zeros((16, 16), bool))


def test_ssim_identical(rng):
    img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    assert MT.ssim(img, img) == pytest.approx(1.0)


def test_ssim_negative_on_inverted_pattern():
    a = np.zeros((32, 32, 3), np.uint8)
    a[::2] = 255  # stripes
    b = 255 - a
    assert MT.ssim(a, b) < 0


def test_ssim_constant_offset_closed_form():
    # zero-variance images: SSIM reduces to the luminance term
    a = np.full((32, 32, 3), 100, np.uint8)
    b = np.full((32, 32, 3), 110, np.uint8)
    c1 = (0.01 * 255) ** 2
    mx, my = 100.0, 110.0
    expect = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    assert MT.ssim(a, b) == pytest.approx(expect, abs=1e-9)


def test_ssim_too_small(rng):
    img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    with pytest.raises(TooSmall):
        MT.ssim(img, img)


def test_evaluate_run_perfect(tmp_path):
    # a fabricated run whose outputs equal the ground truth exactly
    import json

    from homer.imgio import save_image
    from homer.mask import save_mask_png
    from homer.scenegen import generate, standard_scene, SyntheticScene

    spec = standard_scene(seed=3, n_views=3, size=(96, 96), n_objects=2)
    generate(spec, tmp_path / "scene")
    scene = SyntheticScene(spec)

    run = tmp_path / "run"
    (run / "masks").mkdir(parents=True)
    (run / "inpainted").mkdir()
    views = []
    for j in range(3):
        save_image(scene.clean(j), run / "inpainted" / f"view_{j}.png")
        entry = {
            "index": j,
            "provenance": "warped",
            "image_path": f"inpainted/view_{j}.png",
            "mask_paths": {},
            "coarse_mask_paths": {},
            "losses": {},
            "radii": {},
            "degraded_reasons": [],
        }
        for k in (1, 2):
            save_mask_png(scene.gt_mask(j, k), run / "masks" / f"view_{j}_obj_{k}.png")
            entry["mask_paths"][str(k)] = f"masks/view_{j}_obj_{k}.png"
        views.append(entry)
    (run / "report.json").write_text(json.dumps({"views": views}))

    rep = MT.evaluate_run(run, tmp_path / "scene" / "gt")
    assert rep.aggregates["iou"]["mean"] == 1.0
    assert rep.aggregates["psnr_db"]["min"] == 99.0
    assert rep.aggregates["ssim"]["min"] == pytest.approx(1.0)
    assert (run / "eval.json").exists() and (run / "eval.csv").exists()
    assert not rep.missing


def test_evaluate_run_missing_gt_collected(tmp_path):
    import json

    run = tmp_path / "run"
    run.mkdir()
    (run / "report.json").write_text(
        json.dumps({"views": [{"index": 0, "provenance": "warped", "image_path": "x.png",
                               "mask_paths": {}, "losses": {}, "radii": {}, "degraded_reasons": []}]})
    )
    rep = MT.evaluate_run(run, tmp_path / "nope", write=False)
    assert rep.missing
