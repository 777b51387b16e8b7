from .trace import TraceRecord, PredictionTrace, write_trace, read_trace
from .predict import predict_video, evaluate_checkpoint, OnlinePredictor
from .metrics import compute_metrics, EvalReport
from .ribbon import render_ribbon, ribbon_array, phase_color

__all__ = [
    "TraceRecord",
    "PredictionTrace",
    "write_trace",
    "read_trace",
    "predict_video",
    "evaluate_checkpoint",
    "OnlinePredictor",
    "compute_metrics",
    "EvalReport",
    "render_ribbon",
    "ribbon_array",
    "phase_color",
]
