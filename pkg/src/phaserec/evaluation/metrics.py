"""Accuracy / precision / recall over prediction traces.

Conventions (pinned here, sensitivity alternative behind `pooled`):
  - accuracy per video = correct frames / total frames; dataset AC = mean
    over videos (primary) — frame-pooled accuracy also reported.
  - per-phase PR/RE computed per video, then averaged over the videos where
    the phase has ground-truth support, then macro-averaged over phases.
    A video with no ground-truth frames of phase p contributes nothing to
    p's averages, even if p was (wrongly) predicted there. Within a
    supported video, precision is 0 when p is never predicted.
  - phases with no support anywhere are flagged undefined, never averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..data.manifest import PhaseSet
from .trace import PredictionTrace


@dataclass
class EvalReport:
    accuracy_mean: float
    accuracy_std: float
    precision_mean: float
    recall_mean: float
    per_video_accuracy: dict[str, float]
    per_phase_precision: dict[str, float | None]
    per_phase_recall: dict[str, float | None]
    undefined_phases: list[str]
    accuracy_pooled: float
    aggregation: str = "per-video macro"
    precision_std: float = 0.0
    recall_std: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _confusion(trace: PredictionTrace, n_phases: int) -> np.ndarray:
    """counts[gt, pred] over the trace's frames."""
    counts = np.zeros((n_phases, n_phases), dtype=np.int64)
    for r in trace.records:
        counts[r.gt, r.pred] += 1
    return counts


def compute_metrics(traces: list[PredictionTrace], phase_set: PhaseSet,
                    pooled: bool = False) -> EvalReport:
    if not traces:
        raise ValueError("need at least one trace")
    for tr in traces:
        if any(r.gt < 0 for r in tr.records):
            raise ValueError(f"trace {tr.video_id} has unknown ground truth (gt=-1)")
    n = len(phase_set)
    per_video_acc = {}
    confusions = {}
    # Canonical video order makes every reduction independent of input order.
    for tr in sorted(traces, key=lambda t: t.video_id):
        c = _confusion(tr, n)
        confusions[tr.video_id] = c
        per_video_acc[tr.video_id] = float(np.trace(c) / max(c.sum(), 1))

    prec: dict[str, float | None] = {}
    rec: dict[str, float | None] = {}
    undefined = []
    for p, name in enumerate(phase_set.names):
        if pooled:
            total = sum(confusions.values())
            support = total[p].sum()
            if support == 0:
                prec[name] = rec[name] = None
                undefined.append(name)
                continue
            tp, fp, fn = total[p, p], total[:, p].sum() - total[p, p], total[p].sum() - total[p, p]
            prec[name] = float(tp / (tp + fp)) if tp + fp > 0 else 0.0
            rec[name] = float(tp / (tp + fn))
            continue
        video_prec, video_rec = [], []
        for c in confusions.values():
            if c[p].sum() == 0:     # no ground-truth support in this video
                continue
            tp = c[p, p]
            fp = c[:, p].sum() - tp
            fn = c[p].sum() - tp
            video_prec.append(float(tp / (tp + fp)) if tp + fp > 0 else 0.0)
            video_rec.append(float(tp / (tp + fn)))
        if not video_prec:
            prec[name] = rec[name] = None
            undefined.append(name)
        else:
            prec[name] = float(np.mean(video_prec))
            rec[name] = float(np.mean(video_rec))

    defined_p = [v for v in prec.values() if v is not None]
    defined_r = [v for v in rec.values() if v is not None]
    acc_values = list(per_video_acc.values())
    total_c = sum(confusions.values())
    return EvalReport(
        accuracy_mean=float(np.mean(acc_values)),
        accuracy_std=float(np.std(acc_values)),
        precision_mean=float(np.mean(defined_p)) if defined_p else 0.0,
        precision_std=float(np.std(defined_p)) if defined_p else 0.0,
        recall_mean=float(np.mean(defined_r)) if defined_r else 0.0,
        recall_std=float(np.std(defined_r)) if defined_r else 0.0,
        per_video_accuracy=per_video_acc,
        per_phase_precision=prec,
        per_phase_recall=rec,
        undefined_phases=undefined,
        accuracy_pooled=float(np.trace(total_c) / max(total_c.sum(), 1)),
        aggregation="frame-pooled" if pooled else "per-video macro",
    )
