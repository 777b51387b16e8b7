#!/usr/bin/env python3
"""Generate the committed preprocessing golden vectors.

This script is the independent reference for the pinned geometry contract:
nearest-neighbor resize with dst pixel (r, c) <- src (floor(r*H/out_h),
floor(c*W/out_w)), then a center crop at (floor((H-s)/2), floor((W-s)/2)).
It deliberately re-implements both index formulas with plain python loops
and never imports the production package, so the committed outputs stay an
oracle rather than a self-check.

Run from the repo root: python3 tools/gen_golden_vectors.py
Outputs land in golden/ and are committed.
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image

OUT_DIR = Path(__file__).resolve().parent.parent / "golden"

RESIZE = 256
CROP = 224


def synthetic_image(h: int, w: int) -> np.ndarray:
    """Deterministic aperiodic test pattern, no RNG needed."""
    img = np.zeros((h, w, 3), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            img[r, c, 0] = (r * 7 + c * 13 + (r * c) % 251) % 256
            img[r, c, 1] = (r * 11 + c * 3 + (r * r) % 127) % 256
            img[r, c, 2] = (r * 5 + c * 17 + (c * c) % 83) % 256
    return img


def reference_resize_nn(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape[:2]
    dst = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    for r in range(out_h):
        sr = (r * h) // out_h
        for c in range(out_w):
            sc = (c * w) // out_w
            dst[r, c] = src[sr, sc]
    return dst


def reference_center_crop(src: np.ndarray, size: int) -> np.ndarray:
    h, w = src.shape[:2]
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    dst = np.zeros((size, size, 3), dtype=np.uint8)
    for r in range(size):
        for c in range(size):
            dst[r, c] = src[r0 + r, c0 + c]
    return dst


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    cases = [
        ("case_1920x1080", 1080, 1920),   # full-HD benchmark video geometry
        ("case_896x504", 504, 896),       # headset camera geometry
        ("case_640x480", 480, 640),
    ]
    for name, h, w in cases:
        src = synthetic_image(h, w)
        resized = reference_resize_nn(src, RESIZE, RESIZE)
        cropped = reference_center_crop(resized, CROP)
        Image.fromarray(src, "RGB").save(OUT_DIR / f"{name}_input.png")
        Image.fromarray(resized, "RGB").save(OUT_DIR / f"{name}_resized.png")
        Image.fromarray(cropped, "RGB").save(OUT_DIR / f"{name}_cropped.png")
        print(f"{name}: input {h}x{w} -> resized {RESIZE} -> cropped {CROP}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
