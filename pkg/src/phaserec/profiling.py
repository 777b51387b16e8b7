"""Cost-model reproduction: analytic MAC counts, checkpoint size, and a
pinned-single-core latency harness.

One multiply-accumulate counts as ONE unit here. The "FLOPS" column of the
comparison this mirrors is a per-sequence multiply-accumulate count: the
t-frame backbone cost plus t GRU steps plus the decision head. Pooling,
activations, batch-norm and bias adds count as zero.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import CostModelError
from .model.config import ModelConfig


def conv_macs(out_h: int, out_w: int, out_c: int, kernel: int, in_c: int, groups: int = 1) -> int:
    return out_h * out_w * out_c * kernel * kernel * (in_c // groups)


def dense_macs(in_features: int, out_features: int) -> int:
    return in_features * out_features


def _conv_out(size: int, kernel: int, stride: int) -> int:
    # Symmetric k//2 padding, matching the conv layers in the network.
    return (size + 2 * (kernel // 2) - kernel) // stride + 1


def backbone_macs_per_frame(cfg: ModelConfig) -> int:
    bb = cfg.backbone
    size = _conv_out(bb.input_size, 3, 2)
    total = conv_macs(size, size, bb.stem_channels, 3, 3)
    in_ch = bb.stem_channels
    for stage_idx, spec in enumerate(bb.stages):
        out_ch = bb.scaled_channels(spec.out_channels)
        for rep in range(bb.scaled_repeats(spec, stage_idx)):
            stride = spec.stride if rep == 0 else 1
            out_size = _conv_out(size, spec.kernel, stride)
            if spec.block == "mbconv":
                mid = in_ch * spec.expand_ratio
                if spec.expand_ratio != 1:
                    total += conv_macs(size, size, mid, 1, in_ch)
                total += conv_macs(out_size, out_size, mid, spec.kernel, mid, groups=mid)
                total += conv_macs(out_size, out_size, out_ch, 1, mid)
            elif spec.block == "plain-conv":
                total += conv_macs(out_size, out_size, out_ch, spec.kernel, in_ch)
            else:
                raise CostModelError(f"no cost model for block type {spec.block!r}")
            in_ch, size = out_ch, out_size
    total += conv_macs(size, size, bb.feature_dim, 1, in_ch)
    return total


def gru_step_macs(cfg: ModelConfig) -> int:
    f, h = cfg.backbone.feature_dim, cfg.temporal.hidden_units
    return 3 * (dense_macs(f, h) + dense_macs(h, h))


def head_macs(cfg: ModelConfig) -> int:
    h = cfg.temporal.hidden_units
    if cfg.temporal.head_hidden:
        return dense_macs(h, cfg.temporal.head_hidden) + \
            dense_macs(cfg.temporal.head_hidden, cfg.temporal.num_classes)
    return dense_macs(h, cfg.temporal.num_classes)


def count_macs(cfg: ModelConfig, t: int | None = None) -> int:
    """Multiply-accumulate count for one t-frame sequence inference."""
    t = cfg.temporal.t if t is None else t
    return t * (backbone_macs_per_frame(cfg) + gru_step_macs(cfg)) + head_macs(cfg)


def model_size(checkpoint_path: str | Path) -> int:
    """Exact serialized checkpoint size in bytes."""
    return Path(checkpoint_path).stat().st_size


def describe_environment(pinned: bool, pin_warning: str | None = None) -> dict:
    cpu_model = ""
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.lower().startswith("model name"):
                cpu_model = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return {
        "cpu_model": cpu_model or platform.processor() or "unknown",
        "cpu_count": os.cpu_count(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "core_pinned": pinned,
        **({"pin_warning": pin_warning} if pin_warning else {}),
    }


@dataclass
class LatencyStats:
    mean_ms: float
    runs_ms: list[float]
    warmup: int
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def measure_latency(runnable, clips, runs: int = 10, warmup: int = 3,
                    pin_single_core: bool = True) -> LatencyStats:
    """Wall-clock per full-sequence inference over `runs` timed calls.

    Warmup iterations are excluded. The mean is the plain arithmetic mean of
    the raw list (no trimming). Core pinning is applied where the platform
    allows and recorded either way.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    clips = list(clips)
    if not clips:
        raise ValueError("need at least one input clip")
    pinned = False
    pin_warning = None
    prior_affinity = None
    if pin_single_core:
        try:
            prior_affinity = os.sched_getaffinity(0)
            os.sched_setaffinity(0, {min(prior_affinity)})
            pinned = True
        except (AttributeError, OSError) as exc:
            pin_warning = f"core pinning unavailable: {exc}"
    try:
        for i in range(warmup):
            runnable(clips[i % len(clips)])
        timings = []
        for i in range(runs):
            clip = clips[i % len(clips)]
            t0 = time.perf_counter()
            runnable(clip)
            timings.append((time.perf_counter() - t0) * 1000.0)
    finally:
        if prior_affinity is not None:
            os.sched_setaffinity(0, prior_affinity)
    return LatencyStats(mean_ms=sum(timings) / len(timings), runs_ms=timings,
                        warmup=warmup, environment=describe_environment(pinned, pin_warning))


@dataclass
class ProfileReport:
    """Structured cost columns plus the measurement environment."""

    params: int
    size_bytes: int | None
    macs: int
    t: int
    latency: LatencyStats | None
    mac_convention: str = (
        "macs = multiply-accumulate count per t-frame sequence; "
        "1 MAC = 1 unit (not 2 FLOPs)")

    def to_dict(self) -> dict:
        d = {
            "params": self.params,
            "params_millions": round(self.params / 1e6, 4),
            "size_bytes": self.size_bytes,
            "size_mb": round(self.size_bytes / 1e6, 3) if self.size_bytes else None,
            "macs": self.macs,
            "macs_billions": round(self.macs / 1e9, 4),
            "t": self.t,
            "mac_convention": self.mac_convention,
        }
        if self.latency is not None:
            d["latency_ms_mean"] = self.latency.mean_ms
            d["latency_ms_runs"] = self.latency.runs_ms
            d["environment"] = self.latency.environment
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
