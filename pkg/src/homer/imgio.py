"""PNG image I/O helpers. Images are uint8 (H, W, 3) arrays."""

from __future__ import annotations

import numpy as np
from PIL import Image


def load_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr, dtype=np.uint8)
    # low compression: these images are written in bulk and read back often
    Image.fromarray(arr, mode="RGB").save(path, format="PNG", compress_level=1)


def to_gray(arr: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma as float64."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    return 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
