"""Sequence-wise augmentation: one random draw applied to every frame of a clip."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clips import ClipSequence

_GRAY = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class AugmentPolicy:
    crop_size: int = 224
    h_flip_prob: float = 0.5
    v_flip_prob: float = 0.5
    brightness: float = 0.0     # factor drawn from [1-b, 1+b]
    contrast: float = 0.0
    saturation: float = 0.0
    rng_seed: int = 0

    @classmethod
    def none(cls, crop_size: int = 224) -> "AugmentPolicy":
        return cls(crop_size=crop_size, h_flip_prob=0.0, v_flip_prob=0.0)


def augment_sequence(clip: ClipSequence, policy: AugmentPolicy,
                     rng: np.random.Generator | None = None) -> ClipSequence:
    """Random crop + flips + color jitter, sampled once for the whole clip.

    Input frames are pre-crop (e.g. 256×256); output frames are
    crop_size×crop_size float32 on the 0..255 scale. The label and window
    identity are untouched. Deterministic under a fixed policy.rng_seed.
    """
    if rng is None:
        rng = np.random.default_rng(policy.rng_seed)
    t, h, w, _ = clip.frames.shape
    s = policy.crop_size
    if h < s or w < s:
        raise ValueError(f"clip frames {h}×{w} smaller than crop size {s}")

    # One draw per sequence: offsets, flips, jitter factors.
    r0 = int(rng.integers(0, h - s + 1))
    c0 = int(rng.integers(0, w - s + 1))
    do_h = rng.random() < policy.h_flip_prob
    do_v = rng.random() < policy.v_flip_prob
    fb = 1.0 + policy.brightness * float(rng.uniform(-1, 1))
    fc = 1.0 + policy.contrast * float(rng.uniform(-1, 1))
    fs = 1.0 + policy.saturation * float(rng.uniform(-1, 1))

    x = clip.frames[:, r0:r0 + s, c0:c0 + s, :].astype(np.float32)
    if do_h:
        x = x[:, :, ::-1, :]
    if do_v:
        x = x[:, ::-1, :, :]
    if policy.saturation:
        gray = (x @ _GRAY)[..., None]
        x = gray + (x - gray) * np.float32(fs)
    if policy.contrast:
        m = np.float32((x @ _GRAY).mean())  # one clip-wide reference level
        x = (x - m) * np.float32(fc) + m
    if policy.brightness:
        x = x * np.float32(fb)
    x = np.clip(x, 0.0, 255.0)
    return ClipSequence(frames=np.ascontiguousarray(x), label=clip.label,
                        video_id=clip.video_id, end_index=clip.end_index)
