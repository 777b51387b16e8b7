"""Per-frame prediction traces and their JSON-lines file format.

One record per line: {"frame": int, "gt": int, "pred": int,
"probs": [float × C], "latency_ms": float}. Both the in-process stream
simulator and the edge runtime emit exactly this format, which is what
makes cross-runtime diffing possible. gt is -1 when unknown.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class TraceRecord:
    frame: int
    gt: int
    pred: int
    probs: list[float]
    latency_ms: float

    def validate(self):
        if self.probs:
            s = sum(self.probs)
            if not math.isclose(s, 1.0, abs_tol=1e-5):
                raise ValueError(f"frame {self.frame}: probabilities sum to {s}, not 1")
        if self.probs and not (0 <= self.pred < len(self.probs)):
            raise ValueError(f"frame {self.frame}: pred {self.pred} out of range")


@dataclass
class PredictionTrace:
    video_id: str
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def frames(self) -> list[int]:
        return [r.frame for r in self.records]

    def validate(self):
        for r in self.records:
            r.validate()

    def prefix(self, n_frames: int) -> "PredictionTrace":
        return PredictionTrace(self.video_id,
                               [r for r in self.records if r.frame < n_frames])


def write_trace(trace: PredictionTrace, path: str | Path) -> None:
    with open(path, "w") as f:
        for r in trace.records:
            f.write(json.dumps({"frame": r.frame, "gt": r.gt, "pred": r.pred,
                                "probs": r.probs, "latency_ms": r.latency_ms}) + "\n")


def read_trace(path: str | Path, video_id: str | None = None) -> PredictionTrace:
    p = Path(path)
    records = []
    for line in p.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        d = json.loads(line)
        records.append(TraceRecord(frame=int(d["frame"]), gt=int(d["gt"]),
                                   pred=int(d["pred"]), probs=list(d["probs"]),
                                   latency_ms=float(d["latency_ms"])))
    return PredictionTrace(video_id=video_id or p.stem, records=records)
