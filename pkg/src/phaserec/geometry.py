"""Preprocessing geometry: nearest-neighbor resize, center crop, normalization.

These three functions are the bit-exact contract shared with the edge
runtime: identical input bytes must give identical output bytes on both
sides of the export boundary, so the index formulas are pinned here and
mirrored exactly in the edge implementation.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidFrameError

RESIZE_SIZE = 256
CROP_SIZE = 224


def resize_nn(pixels: np.ndarray, target: tuple[int, int] = (RESIZE_SIZE, RESIZE_SIZE)) -> np.ndarray:
    """Nearest-neighbor resize of an H×W×3 uint8 image.

    Output pixel (r, c) copies source pixel (floor(r*H/out_h), floor(c*W/out_w)).
    Integer arithmetic only, so the mapping is reproducible across languages.
    """
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise InvalidFrameError(f"expected H×W×3 image, got shape {pixels.shape}")
    h, w = pixels.shape[:2]
    if h == 0 or w == 0:
        raise InvalidFrameError("empty frame")
    out_h, out_w = target
    rows = (np.arange(out_h, dtype=np.int64) * h) // out_h
    cols = (np.arange(out_w, dtype=np.int64) * w) // out_w
    return pixels[rows[:, None], cols[None, :]]


def center_crop(pixels: np.ndarray, size: int = CROP_SIZE) -> np.ndarray:
    """Crop the central size×size window; origin = (floor((H-s)/2), floor((W-s)/2))."""
    h, w = pixels.shape[:2]
    if h < size or w < size:
        raise InvalidFrameError(f"frame {h}×{w} smaller than crop size {size}")
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return pixels[r0:r0 + size, c0:c0 + size]


def preprocess(pixels: np.ndarray, resize_size: int = RESIZE_SIZE, crop_size: int = CROP_SIZE) -> np.ndarray:
    """resize_nn → center_crop, the full geometric chain (still uint8)."""
    return center_crop(resize_nn(pixels, (resize_size, resize_size)), crop_size)


def normalize(pixels: np.ndarray, mean: tuple[float, float, float], std: tuple[float, float, float]) -> np.ndarray:
    """Scale uint8 to [0,1] then apply per-channel (x-mean)/std, float32 out."""
    x = pixels.astype(np.float32) / np.float32(255.0)
    m = np.asarray(mean, dtype=np.float32)
    s = np.asarray(std, dtype=np.float32)
    return (x - m) / s
