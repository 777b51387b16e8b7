from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from phaserec.errors import InvalidFrameError
from phaserec.geometry import center_crop, normalize, preprocess, resize_nn

GOLDEN = Path(__file__).resolve().parent.parent / "golden"


def load(name):
    with Image.open(GOLDEN / name) as im:
        return np.asarray(im.convert("RGB"))


def test_upscale_2x2_replicates_quadrants():
    src = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    out = resize_nn(src, (4, 4))
    for r in range(4):
        for c in range(4):
            assert (out[r, c] == src[r // 2, c // 2]).all()


def test_resize_identity_is_bytewise():
    rng = np.random.default_rng(0)
    src = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    out = resize_nn(src, (256, 256))
    assert out.tobytes() == src.tobytes()


@pytest.mark.parametrize("case", ["case_1920x1080", "case_896x504", "case_640x480"])
def test_resize_and_crop_match_golden_vectors(case):
    src = load(f"{case}_input.png")
    resized = resize_nn(src, (256, 256))
    assert resized.tobytes() == load(f"{case}_resized.png").tobytes()
    cropped = center_crop(resized, 224)
    assert cropped.tobytes() == load(f"{case}_cropped.png").tobytes()


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 40), w=st.integers(1, 40),
       oh=st.integers(1, 32), ow=st.integers(1, 32), seed=st.integers(0, 99))
def test_resize_matches_floor_index_formula(h, w, oh, ow, seed):
    rng = np.random.default_rng(seed)
    src = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    out = resize_nn(src, (oh, ow))
    for r in range(oh):
        for c in range(ow):
            assert (out[r, c] == src[(r * h) // oh, (c * w) // ow]).all()


def test_center_crop_256_retains_rows_16_to_239():
    src = np.random.default_rng(1).integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    out = center_crop(src, 224)
    assert (out == src[16:240, 16:240]).all()


def test_center_crop_identity_at_exact_size():
    src = np.random.default_rng(2).integers(0, 256, size=(224, 224, 3), dtype=np.uint8)
    assert (center_crop(src, 224) == src).all()


def test_center_crop_origin_floors():
    src = np.random.default_rng(3).integers(0, 256, size=(226, 225, 3), dtype=np.uint8)
    out = center_crop(src, 224)
    assert (out == src[1:225, 0:224]).all()


def test_empty_frame_rejected():
    with pytest.raises(InvalidFrameError):
        resize_nn(np.zeros((0, 5, 3), dtype=np.uint8))
    with pytest.raises(InvalidFrameError):
        resize_nn(np.zeros((5, 5), dtype=np.uint8))


def test_crop_smaller_than_target_rejected():
    with pytest.raises(InvalidFrameError):
        center_crop(np.zeros((100, 300, 3), dtype=np.uint8), 224)


def test_preprocess_chain_is_pure():
    src = load("case_896x504_input.png")
    a = preprocess(src)
    b = preprocess(src.copy())
    assert a.tobytes() == b.tobytes()


def test_normalize_scales_and_centers():
    px = np.full((4, 4, 3), 255, dtype=np.uint8)
    out = normalize(px, (0.5, 0.5, 0.5), (0.5, 0.5, 0.5))
    assert out.dtype == np.float32
    assert np.allclose(out, 1.0)
    assert np.allclose(normalize(np.zeros_like(px), (0.5,) * 3, (0.5,) * 3), -1.0)
