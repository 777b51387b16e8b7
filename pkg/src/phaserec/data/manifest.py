"""Dataset manifests: phase vocabulary, video entries, split assignment.

Manifest files are JSON; annotations are one "frame_index<TAB>phase_name"
line per extracted frame. Manifests are immutable after construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path

from ..errors import ConfigError

SPLITS = ("train", "test", "val")


@dataclass(frozen=True)
class PhaseSet:
    """Ordered phase vocabulary; list index is the class id used everywhere."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise ConfigError(f"need at least 2 phases, got {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise ConfigError("phase names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class ManifestEntry:
    video: str          # frame directory or video container path
    fps: float          # native frame rate of the source
    annotations: str    # TSV path, one label per extracted frame
    split: str = "train"
    video_id: str = ""

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ConfigError(f"split must be one of {SPLITS}, got {self.split!r}")
        if not self.video_id:
            object.__setattr__(self, "video_id", Path(self.video).stem)


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    phase_set: PhaseSet
    sampling_fps: float = 1.0

    def __post_init__(self):
        ids = [e.video_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate video ids in manifest")

    def split(self, name: str) -> tuple[ManifestEntry, ...]:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        return tuple(e for e in self.entries if e.split == name)

    def save(self, path: str | Path) -> None:
        doc = {
            "phases": list(self.phase_set.names),
            "sampling_fps": self.sampling_fps,
            "entries": [
                {"video": e.video, "fps": e.fps, "annotations": e.annotations,
                 "split": e.split, "video_id": e.video_id}
                for e in self.entries
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        doc = json.loads(Path(path).read_text())
        entries = tuple(
            ManifestEntry(video=d["video"], fps=d["fps"], annotations=d["annotations"],
                          split=d.get("split", "train"), video_id=d.get("video_id", ""))
            for d in doc["entries"]
        )
        return cls(entries=entries, phase_set=PhaseSet(tuple(doc["phases"])),
                   sampling_fps=doc.get("sampling_fps", 1.0))


def make_splits(manifest: DatasetManifest, counts: tuple[int, int, int],
                seed: int = 0) -> DatasetManifest:
    """Deterministically reassign (train, test, val) splits by video.

    Videos are shuffled by a seeded RNG over their manifest order, then cut
    into the requested counts. counts must sum to the number of videos.
    """
    n_train, n_test, n_val = counts
    if n_train < 0 or n_test < 0 or n_val < 0:
        raise ConfigError(f"split counts must be non-negative, got {counts}")
    if n_train + n_test + n_val != len(manifest.entries):
        raise ConfigError(
            f"split counts {counts} sum to {n_train + n_test + n_val}, "
            f"manifest has {len(manifest.entries)} videos")
    order = list(range(len(manifest.entries)))
    random.Random(seed).shuffle(order)
    assignment = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            assignment[idx] = "train"
        elif pos < n_train + n_test:
            assignment[idx] = "test"
        else:
            assignment[idx] = "val"
    entries = tuple(replace(e, split=assignment[i]) for i, e in enumerate(manifest.entries))
    return replace(manifest, entries=entries)
