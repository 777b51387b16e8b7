"""Frame sources: lossless PNG frame directories and standard video containers.

Frame directories are the canonical CI format (codec-free); container
decoding goes through OpenCV when it is installed. Channel order is RGB
everywhere in the system.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import IngestionError
from .manifest import ManifestEntry, PhaseSet

FRAME_NAME = "frame_{:06d}.png"

_VIDEO_SUFFIXES = {".mp4", ".avi", ".mkv", ".mov", ".webm"}


@dataclass
class Frame:
    pixels: np.ndarray      # H×W×3 uint8, RGB
    video_id: str
    index: int              # index at the sampling rate
    timestamp_s: float


def write_frame_dir(frames: list[np.ndarray], out_dir: str | Path) -> list[Path]:
    """Write RGB arrays as PNGs named frame_000000.png, frame_000001.png, ..."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, px in enumerate(frames):
        p = out / FRAME_NAME.format(i)
        Image.fromarray(px, mode="RGB").save(p)
        paths.append(p)
    return paths


def _list_frame_files(dir_path: Path) -> list[Path]:
    files = sorted(dir_path.glob("frame_*.png"))
    if not files:
        files = sorted(p for p in dir_path.glob("*.png"))
    return files


def _read_frame_dir(dir_path: Path) -> list[np.ndarray]:
    frames = []
    for p in _list_frame_files(dir_path):
        try:
            with Image.open(p) as im:
                frames.append(np.asarray(im.convert("RGB")))
        except Exception as exc:
            raise IngestionError(f"cannot decode frame {p}: {exc}") from exc
    return frames


def _read_container(path: Path) -> tuple[list[np.ndarray], float]:
    try:
        import cv2
    except ImportError as exc:
        raise IngestionError(
            f"{path}: reading video containers requires opencv-python-headless "
            "(install the [video] extra)") from exc
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise IngestionError(f"cannot open video container {path}")
    native_fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
    frames = []
    while True:
        ok, bgr = cap.read()
        if not ok:
            break
        frames.append(np.ascontiguousarray(bgr[:, :, ::-1]))
    cap.release()
    if not frames:
        raise IngestionError(f"no decodable frames in {path}")
    return frames, native_fps


def extract_frames(video: str | Path, sampling_fps: float, native_fps: float | None = None,
                   video_id: str | None = None) -> list[Frame]:
    """Load a source and downsample to sampling_fps with a uniform stride.

    stride = round(native/sampling); timestamps keep the native clock.
    """
    path = Path(video)
    vid = video_id if video_id is not None else path.stem
    if path.is_dir():
        raw = _read_frame_dir(path)
        if not raw:
            raise IngestionError(f"no frames found in directory {path}")
        if native_fps is None:
            raise IngestionError(f"{path}: frame directories carry no fps; pass the manifest fps")
    elif path.suffix.lower() in _VIDEO_SUFFIXES:
        raw, container_fps = _read_container(path)
        if native_fps is None:
            native_fps = container_fps
        if not native_fps or native_fps <= 0:
            raise IngestionError(f"{path}: container reports no frame rate; pass the manifest fps")
    else:
        raise IngestionError(f"unsupported video source {path}")
    if sampling_fps <= 0:
        raise IngestionError(f"sampling_fps must be positive, got {sampling_fps}")
    if sampling_fps > native_fps:
        raise IngestionError(
            f"sampling_fps {sampling_fps} exceeds native fps {native_fps} for {path}")
    stride = max(1, round(native_fps / sampling_fps))
    out = []
    for k, src_idx in enumerate(range(0, len(raw), stride)):
        out.append(Frame(pixels=raw[src_idx], video_id=vid, index=k,
                         timestamp_s=src_idx / native_fps))
    return out


def load_frames(entry: ManifestEntry, sampling_fps: float) -> list[Frame]:
    return extract_frames(entry.video, sampling_fps, native_fps=entry.fps,
                          video_id=entry.video_id)


def write_annotations(path: str | Path, labels: list[str]) -> None:
    """One "frame_index<TAB>phase_name" line per extracted frame."""
    lines = [f"{i}\t{name}" for i, name in enumerate(labels)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_annotations(path: str | Path, phase_set: PhaseSet) -> list[int]:
    """Parse an annotation TSV into class ids, validating names and indices."""
    p = Path(path)
    if not p.exists():
        raise IngestionError(f"annotation file {p} does not exist")
    labels = []
    for lineno, line in enumerate(p.read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            idx_str, name = line.split("\t")
            idx = int(idx_str)
        except ValueError as exc:
            raise IngestionError(f"{p}:{lineno + 1}: malformed annotation line {line!r}") from exc
        if idx != len(labels):
            raise IngestionError(f"{p}:{lineno + 1}: expected frame index {len(labels)}, got {idx}")
        if name not in phase_set.names:
            raise IngestionError(f"{p}:{lineno + 1}: unknown phase {name!r}")
        labels.append(phase_set.index(name))
    return labels
