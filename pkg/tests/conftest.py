import numpy as np
import pytest

from homer.geometry import Homography


def random_homography(rng, size=(256, 256)):
    """Bounded random projective transform, safely invertible over the frame."""
    w, h = size
    angle = rng.uniform(-0.15, 0.15)
    scale = rng.uniform(0.9, 1.1)
    tx, ty = rng.uniform(-0.08, 0.08, 2) * (w, h)
    px, py = rng.uniform(-1, 1, 2) * 1e-4
    c, s = np.cos(angle), np.sin(angle)
    core = np.array(
        [[scale * c, -scale * s, tx], [scale * s, scale * c, ty], [px, py, 1.0]]
    )
    t_fwd = np.array([[1, 0, w / 2], [0, 1, h / 2], [0, 0, 1.0]])
    t_back = np.array([[1, 0, -w / 2], [0, 1, -h / 2], [0, 0, 1.0]])
    return Homography.from_matrix(t_fwd @ core @ t_back)


def random_blob(rng, size=(256, 256), r_base=45):
    """Smooth random blob mask, comfortably bigger than quantization noise."""
    w, h = size
    cx = rng.uniform(0.35, 0.65) * w
    cy = rng.uniform(0.35, 0.65) * h
    yy, xx = np.mgrid[0:h, 0:w]
    ang = np.arctan2(yy - cy, xx - cx)
    wobble = sum(
        rng.uniform(0.04, 0.12) * np.cos(k * ang + rng.uniform(0, 2 * np.pi))
        for k in (2, 3, 5)
    )
    r = r_base * (1.0 + wobble)
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r**2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
