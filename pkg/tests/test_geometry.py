import numpy as np
import pytest

from conftest import random_blob, random_homography
from homer import geometry as G
from homer.errors import (
    DegenerateConfiguration,
    DegeneratePoint,
    NoConsensus,
    TooFewCorrespondences,
)


def make_correspondences(h, src, noise=0.0, rng=None):
    dst = G.apply_points(h, src)
    if noise and rng is not None:
        dst = dst + rng.normal(0, noise, dst.shape)
    return [G.Correspondence(tuple(p), tuple(q)) for p, q in zip(src, dst)]


# -- apply --


def test_apply_identity():
    h = G.Homography.identity()
    assert G.apply(h, (10, 20)) == (10.0, 20.0)


def test_apply_translation():
    h = G.Homography.translation(5, -3)
    assert G.apply(h, (0, 0)) == (5.0, -3.0)


def test_apply_four_point_scale():
    # The four pairs fix the map (x, y) -> (2x, 2y); direct substitution gives (1, 1).
    corr = [
        G.Correspondence((0, 0), (0, 0)),
        G.Correspondence((1, 0), (2, 0)),
        G.Correspondence((0, 1), (0, 2)),
        G.Correspondence((1, 1), (2, 2)),
    ]
    h = G.estimate_dlt(corr)
    out = G.apply(h, (0.5, 0.5))
    assert out == pytest.approx((1.0, 1.0), abs=1e-9)


def test_apply_degenerate_depth():
    h = G.Homography.from_matrix([[1, 0, 0], [0, 1, 0], [0, -1, 1]])
    with pytest.raises(DegeneratePoint):
        G.apply(h, (0, 1))  # w' = 0 on the line y = 1


def test_normalization_invariants():
    h = G.Homography.from_matrix([[2, 0, 5], [0, 2, -3], [0, 0, 1]])
    assert np.linalg.norm(h.matrix) == pytest.approx(1.0)
    assert h.matrix[2, 2] >= 0
    # inverse round-trip
    p = (37.5, 81.25)
    back = G.apply(h.inverse(), G.apply(h, p))
    assert back == pytest.approx(p, abs=1e-6)


def test_canonical_sign_scale_invariance():
    m = np.array([[2, 0, 5], [0, 2, -3], [0, 0, 1.0]])
    a = G.Homography.from_matrix(m)
    b = G.Homography.from_matrix(-3.7 * m)
    assert np.abs(a.matrix - b.matrix).max() < 1e-12
    # pure negation normalizes bit-identically; h33 == 0 uses the first
    # nonzero entry to fix the sign
    assert G.Homography.from_matrix(m) == G.Homography.from_matrix(-m)
    swap = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0.0]])
    assert G.Homography.from_matrix(swap) == G.Homography.from_matrix(-swap)


# -- estimate_dlt --


def test_dlt_identity_square():
    pts = [(0, 0), (1, 0), (0, 1), (1, 1)]
    corr = [G.Correspondence(p, p) for p in pts]
    h = G.estimate_dlt(corr)
    ident = np.eye(3) / np.sqrt(3.0)
    assert np.abs(h.matrix - ident).max() < 1e-9


def test_dlt_pure_scaling():
    corr = [
        G.Correspondence((0, 0), (0, 0)),
        G.Correspondence((1, 0), (2, 0)),
        G.Correspondence((0, 1), (0, 2)),
        G.Correspondence((1, 1), (2, 2)),
    ]
    h = G.estimate_dlt(corr)
    s = 1.0 / 3.0  # diag(2, 2, 1) has Frobenius norm 3
    assert h.matrix[0, 0] == pytest.approx(2 * s, abs=1e-9)
    assert h.matrix[1, 1] == pytest.approx(2 * s, abs=1e-9)
    assert h.matrix[2, 2] == pytest.approx(s, abs=1e-9)
    assert abs(h.matrix[0, 1]) < 1e-9 and abs(h.matrix[1, 0]) < 1e-9


def test_dlt_exactness_random(rng):
    # Any 4 non-degenerate pairs from a random H are recovered to 1e-6 px.
    for _ in range(20):
        h_gt = random_homography(rng)
        src = rng.uniform(20, 236, (4, 2))
        corr = make_correspondences(h_gt, src)
        try:
            h = G.estimate_dlt(corr)
        except DegenerateConfiguration:
            continue
        mapped = G.apply_points(h, src)
        expect = G.apply_points(h_gt, src)
        assert np.abs(mapped - expect).max() < 1e-6


def test_dlt_noisy_mean_error(rng):
    h_gt = random_homography(rng)
    src = rng.uniform(10, 246, (100, 2))
    corr = make_correspondences(h_gt, src, noise=0.5, rng=rng)
    h = G.estimate_dlt(corr)
    dst = np.array([c.p_prime for c in corr])
    err = np.sqrt(((G.apply_points(h, src) - dst) ** 2).sum(axis=1))
    assert err.mean() < 1.0


def test_dlt_errors():
    with pytest.raises(TooFewCorrespondences):
        G.estimate_dlt([G.Correspondence((0, 0), (0, 0))] * 3)
    collinear = [
        G.Correspondence((0, 0), (0, 0)),
        G.Correspondence((1, 1), (2, 2)),
        G.Correspondence((2, 2), (4, 4)),
        G.Correspondence((5, 0), (10, 0)),
    ]
    with pytest.raises(DegenerateConfiguration):
        G.estimate_dlt(collinear)
    duplicates = [
        G.Correspondence((0, 0), (0, 0)),
        G.Correspondence((0, 0), (0, 0)),
        G.Correspondence((1, 0), (2, 0)),
        G.Correspondence((0, 1), (0, 2)),
    ]
    with pytest.raises(DegenerateConfiguration):
        G.estimate_dlt(duplicates)


# -- ransac --


def test_ransac_noise_free_consensus(rng):
    h_gt = random_homography(rng)
    src = rng.uniform(10, 246, (100, 2))
    corr = make_correspondences(h_gt, src)
    res = G.ransac_estimate(corr, G.RansacConfig(rng_seed=7))
    assert len(res.inlier_indices) == 100
    assert res.mean_inlier_error_px <= 1e-6


def test_ransac_with_outliers(rng):
    h_gt = random_homography(rng)
    src = rng.uniform(10, 246, (100, 2))
    dst = G.apply_points(h_gt, src)
    out_idx = rng.choice(100, 30, replace=False)
    dst[out_idx] = rng.uniform(0, 256, (30, 2))
    corr = [G.Correspondence(tuple(p), tuple(q)) for p, q in zip(src, dst)]
    res = G.ransac_estimate(corr, G.RansacConfig(inlier_threshold_px=3.0, rng_seed=3))
    assert len(res.inlier_indices) >= 68
    true_in = np.setdiff1d(np.arange(100), out_idx)
    err = np.sqrt(
        ((G.apply_points(res.homography, src[true_in]) - dst[true_in]) ** 2).sum(axis=1)
    )
    assert err.max() <= 1e-3


def test_ransac_minimal_set_equals_dlt():
    corr = [
        G.Correspondence((0, 0), (1, 2)),
        G.Correspondence((10, 0), (12, 1)),
        G.Correspondence((0, 10), (1, 13)),
        G.Correspondence((10, 10), (13, 12)),
    ]
    res = G.ransac_estimate(corr, G.RansacConfig(rng_seed=0))
    h = G.estimate_dlt(corr)
    assert np.abs(res.homography.matrix - h.matrix).max() < 1e-12


def test_ransac_determinism(rng):
    h_gt = random_homography(rng)
    src = rng.uniform(10, 246, (80, 2))
    corr = make_correspondences(h_gt, src, noise=0.5, rng=rng)
    cfg = G.RansacConfig(rng_seed=42)
    r1 = G.ransac_estimate(corr, cfg)
    r2 = G.ransac_estimate(corr, cfg)
    assert r1 == r2


def test_ransac_inlier_soundness(rng):
    h_gt = random_homography(rng)
    src = rng.uniform(10, 246, (90, 2))
    dst = G.apply_points(h_gt, src) + rng.normal(0, 1.0, (90, 2))
    corr = [G.Correspondence(tuple(p), tuple(q)) for p, q in zip(src, dst)]
    cfg = G.RansacConfig(inlier_threshold_px=2.0, rng_seed=5)
    res = G.ransac_estimate(corr, cfg)
    for i in res.inlier_indices:
        mapped = G.apply(res.homography, src[i])
        err = np.hypot(mapped[0] - dst[i][0], mapped[1] - dst[i][1])
        assert err <= cfg.inlier_threshold_px + 1e-12


def test_ransac_no_consensus(rng):
    src = rng.uniform(0, 256, (50, 2))
    dst = rng.uniform(0, 256, (50, 2))
    corr = [G.Correspondence(tuple(p), tuple(q)) for p, q in zip(src, dst)]
    with pytest.raises(NoConsensus):
        G.ransac_estimate(
            corr, G.RansacConfig(inlier_threshold_px=0.5, min_inlier_ratio=0.5, rng_seed=1)
        )


# -- warps --


def test_warp_mask_identity(rng):
    m = random_blob(rng, (64, 64), r_base=18)
    out = G.warp_mask(m, G.Homography.identity(), (64, 64))
    assert np.array_equal(out, m)


def test_warp_mask_translation_oracle(rng):
    m = random_blob(rng, (48, 40), r_base=10)
    h = G.Homography.translation(5, 0)
    out = G.warp_mask(m, h, (48, 40))
    # independent per-pixel loop over the full frame
    expect = np.zeros_like(m)
    for y in range(40):
        for x in range(48):
            sx, sy = x - 5, y
            if 0 <= sx < 48 and 0 <= sy < 40:
                expect[y, x] = m[sy, sx]
    assert np.array_equal(out, expect)


def test_warp_mask_fully_outside():
    m = np.zeros((32, 32), dtype=bool)
    m[10:20, 10:20] = True
    out = G.warp_mask(m, G.Homography.translation(100, 0), (32, 32))
    assert not out.any()


def test_warp_image_identity(rng):
    img = rng.integers(0, 256, (40, 52, 3), dtype=np.uint8)
    out, valid = G.warp_image(img, G.Homography.identity(), (52, 40))
    assert np.array_equal(out, img)
    assert valid.all()


def test_warp_image_translation_band(rng):
    img = rng.integers(0, 256, (40, 52, 3), dtype=np.uint8)
    out, valid = G.warp_image(img, G.Homography.translation(5, 0), (52, 40))
    assert not valid[:, :5].any()
    assert valid[:, 5:].all()
    assert np.array_equal(out[:, 5:], img[:, :-5])
    assert (out[:, :5] == 0).all()


def test_warp_image_constant_color(rng):
    img = np.full((64, 64, 3), (13, 200, 77), dtype=np.uint8)
    for seed in range(5):
        h = random_homography(np.random.default_rng(seed), (64, 64))
        out, valid = G.warp_image(img, h, (64, 64))
        assert (out[valid] == (13, 200, 77)).all()


def test_warp_image_validity_matches_footprint(rng):
    # valid iff all four bilinear neighbors are in bounds, checkable per pixel
    img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    h = random_homography(rng, (32, 32))
    _, valid = G.warp_image(img, h, (32, 32))
    inv = h.inverse()
    for y in range(0, 32, 3):
        for x in range(0, 32, 3):
            sx, sy = G.apply(inv, (x, y))
            if abs(sx - round(sx)) < 1e-6:
                sx = round(sx)
            if abs(sy - round(sy)) < 1e-6:
                sy = round(sy)
            x0, y0 = np.floor(sx), np.floor(sy)
            x1 = x0 + (1 if sx > x0 else 0)
            y1 = y0 + (1 if sy > y0 else 0)
            expect = 0 <= x0 and x1 <= 31 and 0 <= y0 and y1 <= 31
            assert valid[y, x] == expect, (x, y, sx, sy)


def test_warp_roundtrip_blobs(rng):
    from homer.mask import iou
    from scipy import ndimage

    for seed in range(6):
        r = np.random.default_rng(seed)
        m = random_blob(r, (256, 256), r_base=50)
        angle = r.uniform(-15, 15) * np.pi / 180
        tx, ty = r.uniform(-20, 20, 2)
        c, s = np.cos(angle), np.sin(angle)
        mat = np.array([[c, -s, tx], [s, c, ty], [0, 0, 1]])
        t_f = np.array([[1, 0, 128], [0, 1, 128], [0, 0, 1]])
        t_b = np.array([[1, 0, -128], [0, 1, -128], [0, 0, 1]])
        h = G.Homography.from_matrix(t_f @ mat @ t_b)
        back = G.warp_mask(G.warp_mask(m, h, (256, 256)), h.inverse(), (256, 256))
        assert iou(back, m) >= 0.98
        # exact agreement away from the boundary and the frame edge
        dist_in = ndimage.distance_transform_cdt(m, metric="taxicab")
        dist_out = ndimage.distance_transform_cdt(~m, metric="taxicab")
        far = (dist_in >= 2) | (dist_out >= 2)
        far[:2, :] = far[-2:, :] = False
        far[:, :2] = far[:, -2:] = False
        assert np.array_equal(back[far], m[far])


# -- chain --


def test_chain_inverse_is_identity(rng):
    h = random_homography(rng)
    comp = G.chain(h, h.inverse())
    assert np.abs(comp.matrix - np.eye(3) / np.sqrt(3.0)).max() < 1e-8


def test_chain_identity_element(rng):
    h = random_homography(rng)
    comp = G.chain(G.Homography.identity(), h)
    assert np.abs(comp.matrix - h.matrix).max() < 1e-12


def test_chain_pointwise_oracle(rng):
    h1 = random_homography(rng)
    h2 = random_homography(rng)
    comp = G.chain(h1, h2)
    pts = rng.uniform(0, 256, (50, 2))
    direct = G.apply_points(comp, pts)
    seq = G.apply_points(h2, G.apply_points(h1, pts))
    assert np.abs(direct - seq).max() < 1e-6
