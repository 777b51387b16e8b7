"""Full sequence classifier: shared per-frame backbone, GRU over t steps,
decision head on the final hidden state."""

from __future__ import annotations

import os

import torch
from torch import nn

from ..errors import NumericError
from .backbone import Backbone
from .config import ModelConfig
from .gru import GRUCell, xavier_normal_std

DEBUG_SHAPES_ENV = "PHASEREC_DEBUG_SHAPES"


class FrameSequenceClassifier(nn.Module):
    """B×t×H×W×3 normalized frames → B×C logits for the last frame's phase.

    The hidden state starts at zero for every window and is never carried
    across windows; eval-mode forward is a pure function of (params, input).
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = Backbone(cfg.backbone)
        self.gru = GRUCell(cfg.backbone.feature_dim, cfg.temporal.hidden_units)
        self.act = nn.ReLU6()
        self.dropout = nn.Dropout(cfg.temporal.dropout_prob)
        if cfg.temporal.head_hidden:
            self.pre_head = nn.Linear(cfg.temporal.hidden_units, cfg.temporal.head_hidden)
            head_in = cfg.temporal.head_hidden
        else:
            self.pre_head = None
            head_in = cfg.temporal.hidden_units
        self.head = nn.Linear(head_in, cfg.temporal.num_classes)
        self.reset_head_weights()

    def reset_head_weights(self):
        with torch.no_grad():
            for lin in filter(None, (self.pre_head, self.head)):
                lin.weight.normal_(0.0, xavier_normal_std(lin.in_features, lin.out_features))
                lin.bias.zero_()

    @property
    def debug_shapes(self) -> bool:
        return bool(int(os.environ.get(DEBUG_SHAPES_ENV, "0")))

    def _check_finite(self, x: torch.Tensor, layer: str):
        if not torch.isfinite(x).all():
            raise NumericError(f"non-finite activations in {layer}")

    def frame_features(self, frames: torch.Tensor) -> torch.Tensor:
        """B×t×H×W×3 → B×t×F pooled backbone features (shared weights)."""
        b, t, h, w, c = frames.shape
        x = frames.reshape(b * t, h, w, c).permute(0, 3, 1, 2).contiguous()
        if self.debug_shapes:
            fmap = self.backbone.forward_map(x)
            side = self.cfg.backbone.input_size // self.cfg.backbone.downsample_factor
            assert fmap.shape[1] == self.backbone.final_block_channels, fmap.shape
            assert fmap.shape[2] == fmap.shape[3] == side, fmap.shape
        feats = self.backbone(x)
        self._check_finite(feats, "backbone")
        return feats.reshape(b, t, -1)

    def head_logits(self, h: torch.Tensor) -> torch.Tensor:
        x = self.dropout(self.act(h))
        if self.pre_head is not None:
            x = self.dropout(self.act(self.pre_head(x)))
        logits = self.head(x)
        self._check_finite(logits, "head")
        return logits

    def run_gru(self, feats: torch.Tensor) -> torch.Tensor:
        """B×t×F → B×hidden final state, unrolled from h0 = 0."""
        b = feats.shape[0]
        h = feats.new_zeros(b, self.cfg.temporal.hidden_units)
        for step in range(feats.shape[1]):
            h = self.gru(feats[:, step], h)
        self._check_finite(h, "gru")
        return h

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.ndim != 5 or frames.shape[-1] != 3:
            raise ValueError(f"expected B×t×H×W×3 input, got {tuple(frames.shape)}")
        if frames.shape[1] != self.cfg.temporal.t:
            raise ValueError(f"window length {frames.shape[1]} != configured t={self.cfg.temporal.t}")
        feats = self.frame_features(frames)
        h = self.run_gru(feats)
        if self.debug_shapes:
            assert h.shape == (frames.shape[0], self.cfg.temporal.hidden_units)
        return self.head_logits(h)


def count_params(model: nn.Module) -> int:
    """Exact count of trainable parameter entries."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def build_model(cfg: ModelConfig, init_seed: int = 0,
                backbone_weights: str | None = None) -> FrameSequenceClassifier:
    """Deterministically initialized model; optional backbone weight load."""
    torch.manual_seed(init_seed)
    model = FrameSequenceClassifier(cfg)
    if backbone_weights is not None:
        from .checkpoint import load_tensors_into
        load_tensors_into(model.backbone, backbone_weights, prefix="backbone.")
    return model
