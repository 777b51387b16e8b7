"""Numerical parity and latency comparison between the native and exported paths."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from ..errors import ParityError
from ..model.checkpoint import load_checkpoint
from ..profiling import LatencyStats, measure_latency
from .bundle import INPUT_NAME, OUTPUT_NAME, load_bundle
from .executor import GraphExecutor

DEFAULT_TOLERANCE = 1e-4


@dataclass
class ParityReport:
    n_samples: int
    max_abs_diff: float
    argmax_agreement: float
    tolerance: float
    ok: bool
    worst_sample: int = -1
    backend: str = "numpy"
    per_backend: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def parity_check(checkpoint_path: str | Path, bundle_path: str | Path,
                 n_samples: int = 100, seed: int = 0,
                 tolerance: float = DEFAULT_TOLERANCE,
                 backends: tuple[str, ...] = ("numpy", "torch")) -> ParityReport:
    """Random valid inputs through the native path and every bundle backend.

    Inputs are drawn over the normalized pixel range implied by the model's
    normalization constants, so the backbone sees realistic magnitudes. The
    report's headline numbers are the worst across backends; per-backend
    figures ride along.
    """
    model, _ = load_checkpoint(checkpoint_path)
    proto, _ = load_bundle(bundle_path)
    executors = {b: GraphExecutor(proto, backend=b) for b in backends}
    cfg = model.cfg
    t, size = cfg.temporal.t, cfg.backbone.input_size
    lo = (0.0 - max(cfg.norm_mean)) / max(cfg.norm_std)
    hi = (1.0 - min(cfg.norm_mean)) / min(cfg.norm_std)
    rng = np.random.default_rng(seed)

    per_backend = {b: {"max_abs_diff": 0.0, "agree": 0, "worst_sample": -1}
                   for b in backends}
    with torch.no_grad():
        for i in range(n_samples):
            x = rng.uniform(lo, hi, size=(1, t, size, size, 3)).astype(np.float32)
            native = model(torch.from_numpy(x)).numpy()[0]
            for b, executor in executors.items():
                exported = executor.run({INPUT_NAME: x})[OUTPUT_NAME][0]
                if native.shape != exported.shape:
                    raise ParityError(f"[{b}] logit shapes diverge: native "
                                      f"{native.shape} vs exported {exported.shape}")
                stats = per_backend[b]
                diff = float(np.abs(native - exported).max())
                if diff > stats["max_abs_diff"]:
                    stats["max_abs_diff"], stats["worst_sample"] = diff, i
                stats["agree"] += int(native.argmax() == exported.argmax())
    for stats in per_backend.values():
        stats["argmax_agreement"] = stats.pop("agree") / n_samples
    worst_backend = max(per_backend, key=lambda b: per_backend[b]["max_abs_diff"])
    worst = per_backend[worst_backend]
    agreement = min(s["argmax_agreement"] for s in per_backend.values())
    return ParityReport(n_samples=n_samples, max_abs_diff=worst["max_abs_diff"],
                        argmax_agreement=agreement, tolerance=tolerance,
                        ok=worst["max_abs_diff"] < tolerance and agreement == 1.0,
                        worst_sample=worst["worst_sample"], backend=worst_backend,
                        per_backend=per_backend)


@dataclass
class SpeedCompareReport:
    eager: LatencyStats
    exported: LatencyStats
    ratio: float                    # eager mean / exported mean
    exported_not_slower: bool
    note: str = ("only the direction (exported <= eager) is a contract; "
                 "the magnitude is host-dependent")

    def to_dict(self) -> dict:
        return {
            "eager_ms": self.eager.to_dict(),
            "exported_ms": self.exported.to_dict(),
            "ratio_eager_over_exported": self.ratio,
            "exported_not_slower": self.exported_not_slower,
            "note": self.note,
        }


def compare_latency_eager_vs_exported(checkpoint_path: str | Path,
                                      bundle_path: str | Path,
                                      runs: int = 10, warmup: int = 3,
                                      seed: int = 0, n_inputs: int = 2,
                                      backend: str = "torch",
                                      rounds: int = 5) -> SpeedCompareReport:
    """measure_latency on both paths with identical inputs; reports the ratio.

    The `runs` timings per path are split into alternating rounds so that
    slow host-load drift hits both paths equally (paired measurement).
    The exported path uses the deployment backend by default; pass
    backend="numpy" to time the literal reference executor instead.
    """
    model, _ = load_checkpoint(checkpoint_path)
    proto, _ = load_bundle(bundle_path)
    executor = GraphExecutor(proto, backend=backend)
    cfg = model.cfg
    t, size = cfg.temporal.t, cfg.backbone.input_size
    rng = np.random.default_rng(seed)
    clips = [rng.uniform(-1, 1, size=(1, t, size, size, 3)).astype(np.float32)
             for _ in range(n_inputs)]

    prior_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    rounds = max(1, min(rounds, runs))
    per_round = [runs // rounds + (1 if r < runs % rounds else 0)
                 for r in range(rounds)]
    eager_ms: list[float] = []
    exported_ms: list[float] = []
    env = None
    try:
        def eager(x):
            with torch.no_grad():
                return model(torch.from_numpy(x)).numpy()

        def exported(x):
            return executor.run({INPUT_NAME: x})[OUTPUT_NAME]

        for r, n_runs in enumerate(per_round):
            w = warmup if r == 0 else 1
            stats_a = measure_latency(eager, clips, runs=n_runs, warmup=w)
            stats_b = measure_latency(exported, clips, runs=n_runs, warmup=w)
            eager_ms += stats_a.runs_ms
            exported_ms += stats_b.runs_ms
            env = stats_b.environment
    finally:
        torch.set_num_threads(prior_threads)
    eager_stats = LatencyStats(mean_ms=sum(eager_ms) / len(eager_ms),
                               runs_ms=eager_ms, warmup=warmup, environment=env)
    exported_stats = LatencyStats(mean_ms=sum(exported_ms) / len(exported_ms),
                                  runs_ms=exported_ms, warmup=warmup, environment=env)
    ratio = eager_stats.mean_ms / exported_stats.mean_ms
    return SpeedCompareReport(eager=eager_stats, exported=exported_stats, ratio=ratio,
                              exported_not_slower=exported_stats.mean_ms <= eager_stats.mean_ms)
