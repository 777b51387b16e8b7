"""Online streaming simulator: frames arrive on a clock, an inference
consumer windows onto the most recent t frames.

Two logical actors — producer (arrival schedule) and consumer (inference
loop) — share only the window buffer, realized here as index arithmetic
over the arrival timeline. Under the latest-frame policy, frames that
arrive while an inference is in flight are dropped except the newest
(a real-time display consuming a camera feed); queue-all processes every
frame in order regardless of backlog.

The clock is virtual by default (deterministic CI runs); real-time mode
sleeps against the wall clock for demos.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data.clips import window_indices
from .errors import ConfigError
from .evaluation.trace import PredictionTrace, TraceRecord

POLICIES = ("latest-frame", "queue-all")


@dataclass(frozen=True)
class StreamConfig:
    fps: float = 30.0
    t: int = 10
    drop_policy: str = "latest-frame"
    max_duration_s: float | None = None
    realtime: bool = False

    def __post_init__(self):
        if self.fps <= 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if self.t < 1:
            raise ConfigError(f"t must be >= 1, got {self.t}")
        if self.drop_policy not in POLICIES:
            raise ConfigError(f"drop_policy must be one of {POLICIES}")


@dataclass
class StreamResult:
    trace: PredictionTrace
    arrived_frames: int
    predicted_frames: int
    elapsed_s: float
    fps: float
    start_times: list[float] = field(default_factory=list)
    completion_times: list[float] = field(default_factory=list)


def _probs_from_output(out) -> np.ndarray:
    out = np.asarray(out, dtype=np.float64).reshape(-1)
    if out.min() >= 0 and abs(out.sum() - 1.0) < 1e-5:
        return out
    e = np.exp(out - out.max())
    return e / e.sum()


def run_stream(runnable: Callable[[np.ndarray], np.ndarray],
               frames: list[np.ndarray], cfg: StreamConfig,
               labels: list[int] | None = None,
               latency_model: Callable[[int], float] | None = None,
               video_id: str = "stream") -> StreamResult:
    """Replay frames at cfg.fps against the runnable.

    `frames` are already preprocessed per-frame tensors (the device
    preprocesses each capture once, at ingest). The runnable gets the
    stacked t-frame window ending at the newest arrived frame and returns
    logits or probabilities. With a latency_model, the simulated clock
    advances by its value per inference (deterministic stubs); otherwise by
    the measured wall time of the runnable call.
    """
    n = len(frames)
    trace = PredictionTrace(video_id=video_id)
    if n == 0:
        return StreamResult(trace, 0, 0, 0.0, cfg.fps)

    def arrival(i: int) -> float:
        return i / cfg.fps

    wall_start = time.monotonic()
    starts: list[float] = []
    completions: list[float] = []
    now = arrival(0)
    last_consumed = -1
    next_queued = 0

    while True:
        if cfg.drop_policy == "latest-frame":
            latest = min(int(now * cfg.fps + 1e-9), n - 1)
            if latest == last_consumed:
                if latest == n - 1:
                    break
                now = arrival(latest + 1)
                continue
            target = latest
        else:  # queue-all
            if next_queued >= n:
                break
            target = next_queued
            now = max(now, arrival(target))
        if cfg.max_duration_s is not None and now >= cfg.max_duration_s - 1e-9:
            break
        if cfg.realtime:
            wall_now = time.monotonic() - wall_start
            if wall_now < now:
                time.sleep(now - wall_now)

        window = np.stack([frames[j] for j in window_indices(target, cfg.t)])
        t0 = time.perf_counter()
        out = runnable(window)
        measured_s = time.perf_counter() - t0
        latency_s = latency_model(target) if latency_model is not None else measured_s

        probs = _probs_from_output(out)
        starts.append(now)
        completions.append(now + latency_s)
        trace.records.append(TraceRecord(
            frame=target,
            gt=int(labels[target]) if labels is not None else -1,
            pred=int(probs.argmax()),
            probs=[float(p) for p in probs],
            latency_ms=latency_s * 1000.0,
        ))
        last_consumed = target
        next_queued = target + 1
        now += latency_s

    end = completions[-1] if completions else 0.0
    if cfg.max_duration_s is not None:
        end = min(end, cfg.max_duration_s)
    elapsed = max(end - arrival(0), 0.0)
    arrived = min(n, int(end * cfg.fps + 1e-9) + 1) if completions else 0
    return StreamResult(trace=trace, arrived_frames=arrived,
                        predicted_frames=len(trace.records),
                        elapsed_s=elapsed, fps=cfg.fps,
                        start_times=starts, completion_times=completions)


def summarize_stream(result: StreamResult) -> dict:
    """Mean latency, achieved prediction rate, and drop rate for the run."""
    records = result.trace.records
    mean_latency = float(np.mean([r.latency_ms for r in records])) if records else 0.0
    rate = result.predicted_frames / result.elapsed_s if result.elapsed_s > 0 else 0.0
    dropped = result.arrived_frames - result.predicted_frames
    return {
        "predictions": result.predicted_frames,
        "arrived_frames": result.arrived_frames,
        "elapsed_s": result.elapsed_s,
        "mean_latency_ms": mean_latency,
        "prediction_rate_hz": rate,
        "drop_rate": dropped / result.arrived_frames if result.arrived_frames else 0.0,
    }
