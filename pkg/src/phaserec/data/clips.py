"""Sliding-window clip construction over a labeled frame sequence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ClipSequence:
    """t consecutive frames ending at end_index; label is the last frame's phase.

    Windows that would start before the video are left-padded by replicating
    frame 0, so a clip (and hence a prediction) exists for every frame.
    """

    frames: np.ndarray      # t×H×W×3 (uint8 pre-augmentation, float32 after)
    label: int
    video_id: str
    end_index: int

    @property
    def t(self) -> int:
        return self.frames.shape[0]


def window_indices(end_index: int, t: int) -> list[int]:
    """Source frame indices for the clip ending at end_index (left-padded)."""
    return [max(0, i) for i in range(end_index - t + 1, end_index + 1)]


def build_clips(frames: list[np.ndarray], labels: list[int], video_id: str = "",
                t: int = 10, stride: int = 1) -> list[ClipSequence]:
    """One clip ending at every stride-th frame index.

    Clips are strictly causal: no clip references a frame after its end_index.
    Empty input gives an empty list.
    """
    if len(frames) != len(labels):
        raise ValueError(f"{len(frames)} frames but {len(labels)} labels")
    if t < 1 or stride < 1:
        raise ValueError(f"t and stride must be >= 1, got t={t} stride={stride}")
    clips = []
    for end in range(0, len(frames), stride):
        idx = window_indices(end, t)
        clips.append(ClipSequence(
            frames=np.stack([frames[i] for i in idx]),
            label=labels[end],
            video_id=video_id,
            end_index=end,
        ))
    return clips
