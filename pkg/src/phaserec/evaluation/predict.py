"""Frame-level online prediction over whole videos.

Every frame i is predicted from the window ending at i (left-padded near
the start) with the hidden state reset to zero per window — strictly
causal. Backbone features are computed once per frame and reused across
windows, which is mathematically identical to running the full network on
each window because the backbone is per-frame and shared.
"""

from __future__ import annotations

import time

import numpy as np
import torch

from ..data.clips import window_indices
from ..data.manifest import DatasetManifest
from ..model.checkpoint import load_checkpoint
from ..training import VideoClips, load_split, _center_crop_clip  # noqa: F401
from .trace import PredictionTrace, TraceRecord


class OnlinePredictor:
    """Causal per-frame predictor with a per-frame feature cache."""

    def __init__(self, model, cfg=None):
        self.model = model.eval()
        self.cfg = cfg if cfg is not None else model.cfg

    def _frame_tensor(self, pixels: np.ndarray) -> torch.Tensor:
        crop = self.cfg.backbone.input_size
        h, w = pixels.shape[:2]
        r0, c0 = (h - crop) // 2, (w - crop) // 2
        x = pixels[r0:r0 + crop, c0:c0 + crop].astype(np.float32) / np.float32(255.0)
        x = (x - np.asarray(self.cfg.norm_mean, dtype=np.float32)) / \
            np.asarray(self.cfg.norm_std, dtype=np.float32)
        return torch.from_numpy(x)

    def predict(self, frames: list[np.ndarray], labels: list[int] | None = None,
                video_id: str = "") -> PredictionTrace:
        """frames: pre-crop pixels (resize_size²); labels: per-frame gt or None."""
        t = self.cfg.temporal.t
        trace = PredictionTrace(video_id=video_id)
        feats: list[torch.Tensor] = []
        with torch.no_grad():
            for i, pixels in enumerate(frames):
                t0 = time.perf_counter()
                x = self._frame_tensor(pixels)[None, None]  # 1×1×H×W×3
                feats.append(self.model.frame_features(x)[0, 0])
                window = torch.stack([feats[j] for j in window_indices(i, t)])
                h = self.model.run_gru(window[None])
                logits = self.model.head_logits(h)[0]
                probs = torch.softmax(logits, dim=0)
                latency_ms = (time.perf_counter() - t0) * 1000.0
                trace.records.append(TraceRecord(
                    frame=i,
                    gt=int(labels[i]) if labels is not None else -1,
                    pred=int(probs.argmax()),
                    probs=[float(p) for p in probs],
                    latency_ms=latency_ms,
                ))
        return trace


def predict_video(model, frames: list[np.ndarray], labels: list[int] | None = None,
                  video_id: str = "") -> PredictionTrace:
    return OnlinePredictor(model).predict(frames, labels, video_id)


def evaluate_checkpoint(checkpoint_path, manifest: DatasetManifest, split: str = "test",
                        pooled: bool = False):
    """Online prediction over every video of the split, reduced to an EvalReport."""
    from .metrics import compute_metrics

    model, header = load_checkpoint(checkpoint_path)
    predictor = OnlinePredictor(model)
    traces = []
    for video in load_split(manifest, split, model.cfg):
        traces.append(predictor.predict(video.frames, video.labels, video.video_id))
    report = compute_metrics(traces, manifest.phase_set, pooled=pooled)
    return report, traces
