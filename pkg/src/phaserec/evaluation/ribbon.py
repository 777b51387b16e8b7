"""Ground-truth vs prediction ribbon rendering for a whole video timeline."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Patch

from .trace import PredictionTrace

_TAB20 = matplotlib.colormaps["tab20"]


def phase_color(phase_idx: int) -> tuple[int, int, int]:
    """Deterministic phase→RGB mapping from the phase's class id."""
    r, g, b, _ = _TAB20(phase_idx % 20)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def ribbon_array(trace: PredictionTrace, band_height: int = 24) -> np.ndarray:
    """Two stacked color bands (GT above, Pred below), one column per frame."""
    if not trace.records:
        raise ValueError("trace has no records")
    n = len(trace.records)
    img = np.zeros((2 * band_height, n, 3), dtype=np.uint8)
    for col, r in enumerate(sorted(trace.records, key=lambda rec: rec.frame)):
        img[:band_height, col] = phase_color(r.gt)
        img[band_height:, col] = phase_color(r.pred)
    return img


def build_ribbon_figure(trace: PredictionTrace, phase_names: list[str]):
    img = ribbon_array(trace)
    band = img.shape[0] // 2
    fig, ax = plt.subplots(figsize=(10, 2.2))
    ax.imshow(img, aspect="auto", interpolation="nearest",
              extent=(0, img.shape[1], 0, img.shape[0]))
    ax.set_yticks([band // 2, band + band // 2])
    ax.set_yticklabels(["Pred", "GT"])
    ax.set_xlabel("frame")
    ax.set_title(trace.video_id)
    handles = [Patch(facecolor=np.array(phase_color(i)) / 255.0, label=name)
               for i, name in enumerate(phase_names)]
    ax.legend(handles=handles, loc="upper center", bbox_to_anchor=(0.5, -0.35),
              ncol=min(len(phase_names), 7), fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def render_ribbon(trace: PredictionTrace, path: str | Path,
                  phase_names: list[str]) -> Path:
    """Write the ribbon to PNG or SVG (chosen by the file suffix)."""
    path = Path(path)
    fig = build_ribbon_figure(trace, phase_names)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
