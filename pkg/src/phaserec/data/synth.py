"""Synthetic phase-structured video generator for desk-scale runs.

Each video traverses the phase vocabulary in order; every phase renders a
visually distinctive moving pattern (own dominant color, stripe texture and
orbiting marker) so a small model can separate the classes. Fully
deterministic under the seed.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .frames import write_annotations, write_frame_dir
from .manifest import DatasetManifest, ManifestEntry, PhaseSet

# Phase mean/sd duration pattern for the default 5-phase desk dataset, in
# seconds. Chosen to mirror a short bench-top procedure: prep, anesthetic,
# incision, excision, inspection.
DEFAULT_DURATIONS = ((27.2, 11.5), (39.2, 10.0), (15.1, 9.9), (32.3, 23.5), (12.3, 8.9))

THEMES = ("bands", "rings")


@dataclass(frozen=True)
class PhaseDuration:
    mean_s: float
    sd_s: float = 0.0


def _phase_palette(i: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    hue = i / n
    base = np.array(colorsys.hsv_to_rgb(hue, 0.75, 0.55), dtype=np.float32)
    marker = np.array(colorsys.hsv_to_rgb((hue + 0.5) % 1.0, 0.9, 0.95), dtype=np.float32)
    return base, marker


def render_frame(phase_idx: int, n_phases: int, t_s: float, size: tuple[int, int],
                 theme: str = "bands", video_jitter: float = 0.0) -> np.ndarray:
    """Render one RGB frame of the given phase at time t_s (seconds)."""
    w, h = size
    base, marker = _phase_palette(phase_idx, n_phases)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    xx /= w
    yy /= h
    if theme == "bands":
        kx, ky = 3.0 + 2.0 * phase_idx, 1.0 + (phase_idx * 2) % 5
        wave = np.sin(2 * np.pi * (kx * xx + ky * yy) + (1.0 + 0.5 * phase_idx) * t_s + video_jitter)
    elif theme == "rings":
        rr = np.sqrt((xx - 0.5) ** 2 + (yy - 0.5) ** 2)
        wave = np.sin(2 * np.pi * (4.0 + phase_idx) * rr - (1.0 + 0.3 * phase_idx) * t_s + video_jitter)
    else:
        raise ConfigError(f"unknown visual theme {theme!r}; themes: {THEMES}")
    img = base[None, None, :] * (0.6 + 0.4 * 0.5 * (wave[..., None] + 1.0))

    # Orbiting marker: phase-specific angular velocity and orbit radius.
    ang = (0.4 + 0.15 * phase_idx) * t_s + video_jitter + phase_idx
    orbit = 0.22 + 0.04 * (phase_idx % 3)
    cx, cy = 0.5 + orbit * np.cos(ang), 0.5 + orbit * np.sin(ang)
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 < 0.08 ** 2
    img[mask] = marker
    return (np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def _draw_durations(durations: list[PhaseDuration], rng: np.random.Generator) -> list[float]:
    out = []
    for d in durations:
        if d.sd_s == 0.0:
            out.append(d.mean_s)
        else:
            out.append(max(1.0, float(rng.normal(d.mean_s, d.sd_s))))
    return out


def synthesize_dataset(n_videos: int, phase_set: PhaseSet,
                       duration_model: list[PhaseDuration] | None = None,
                       visual_theme: str = "bands", seed: int = 0,
                       out_dir: str | Path = "synthetic", fps: float = 1.0,
                       frame_size: tuple[int, int] = (320, 240)) -> DatasetManifest:
    """Generate labeled phase videos as PNG frame directories plus a manifest.

    Phase k of every video lasts round(duration*fps) frames, with durations
    drawn per video from the duration model (exact when sd is zero).
    """
    if n_videos < 1:
        raise ConfigError("need at least one video")
    if visual_theme not in THEMES:
        raise ConfigError(f"unknown visual theme {visual_theme!r}; themes: {THEMES}")
    n_phases = len(phase_set)
    if duration_model is None:
        duration_model = [PhaseDuration(*DEFAULT_DURATIONS[i % len(DEFAULT_DURATIONS)])
                          for i in range(n_phases)]
    if len(duration_model) != n_phases:
        raise ConfigError(f"{len(duration_model)} durations for {n_phases} phases")

    out = Path(out_dir)
    (out / "videos").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(parents=True, exist_ok=True)
    entries = []
    root_rng = np.random.default_rng(seed)
    for v in range(n_videos):
        vid_rng = np.random.default_rng(root_rng.integers(0, 2 ** 63))
        jitter = float(vid_rng.uniform(0, 2 * np.pi))
        durations = _draw_durations(duration_model, vid_rng)
        frames, labels = [], []
        t_global = 0
        for p, dur in enumerate(durations):
            n_frames = int(round(dur * fps))
            for _ in range(n_frames):
                frames.append(render_frame(p, n_phases, t_global / fps, frame_size,
                                           theme=visual_theme, video_jitter=jitter))
                labels.append(phase_set.names[p])
                t_global += 1
        video_id = f"video_{v:03d}"
        video_dir = out / "videos" / video_id
        ann_path = out / "annotations" / f"{video_id}.tsv"
        write_frame_dir(frames, video_dir)
        write_annotations(ann_path, labels)
        entries.append(ManifestEntry(video=str(video_dir), fps=fps,
                                     annotations=str(ann_path), split="train",
                                     video_id=video_id))
    manifest = DatasetManifest(entries=tuple(entries), phase_set=phase_set, sampling_fps=fps)
    manifest.save(out / "manifest.json")
    return manifest
