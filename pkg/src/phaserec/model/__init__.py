from .config import BackboneConfig, TemporalConfig, ModelConfig, StageSpec
from .network import FrameSequenceClassifier, build_model, count_params
from .gru import GRUCell
from .checkpoint import save_checkpoint, load_checkpoint, read_header

__all__ = [
    "BackboneConfig",
    "TemporalConfig",
    "ModelConfig",
    "StageSpec",
    "FrameSequenceClassifier",
    "build_model",
    "count_params",
    "GRUCell",
    "save_checkpoint",
    "load_checkpoint",
    "read_header",
]
