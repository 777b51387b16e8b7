"""Per-frame feature extractor: mobile inverted-bottleneck stack.

Lite flavor throughout: no squeeze-excite, ReLU6 activations, BatchNorm
after every conv, stem and head conv widths fixed under scaling. The
classifier of the upstream image model is replaced by global average
pooling over the head conv output.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import BackboneConfig


class ConvBNAct(nn.Sequential):
    def __init__(self, in_ch, out_ch, kernel, stride, groups=1, act=True,
                 bn_eps=1e-3, bn_momentum=0.01):
        layers = [
            nn.Conv2d(in_ch, out_ch, kernel, stride, padding=kernel // 2,
                      groups=groups, bias=False),
            nn.BatchNorm2d(out_ch, eps=bn_eps, momentum=bn_momentum),
        ]
        if act:
            layers.append(nn.ReLU6(inplace=True))
        super().__init__(*layers)


class MBConv(nn.Module):
    """Inverted residual: 1×1 expand → k×k depthwise → 1×1 project."""

    def __init__(self, in_ch, out_ch, kernel, stride, expand_ratio,
                 bn_eps=1e-3, bn_momentum=0.01):
        super().__init__()
        mid = in_ch * expand_ratio
        self.use_residual = stride == 1 and in_ch == out_ch
        layers = []
        if expand_ratio != 1:
            layers.append(ConvBNAct(in_ch, mid, 1, 1, bn_eps=bn_eps, bn_momentum=bn_momentum))
        layers.append(ConvBNAct(mid, mid, kernel, stride, groups=mid,
                                bn_eps=bn_eps, bn_momentum=bn_momentum))
        layers.append(ConvBNAct(mid, out_ch, 1, 1, act=False,
                                bn_eps=bn_eps, bn_momentum=bn_momentum))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        out = self.block(x)
        if self.use_residual:
            out = out + x
        return out


class Backbone(nn.Module):
    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        self.stem = ConvBNAct(3, cfg.stem_channels, 3, 2,
                              bn_eps=cfg.bn_eps, bn_momentum=cfg.bn_momentum)
        blocks = []
        in_ch = cfg.stem_channels
        for stage_idx, spec in enumerate(cfg.stages):
            out_ch = cfg.scaled_channels(spec.out_channels)
            for rep in range(cfg.scaled_repeats(spec, stage_idx)):
                stride = spec.stride if rep == 0 else 1
                if spec.block == "mbconv":
                    blocks.append(MBConv(in_ch, out_ch, spec.kernel, stride,
                                         spec.expand_ratio, cfg.bn_eps, cfg.bn_momentum))
                else:  # plain-conv
                    blocks.append(ConvBNAct(in_ch, out_ch, spec.kernel, stride,
                                            bn_eps=cfg.bn_eps, bn_momentum=cfg.bn_momentum))
                in_ch = out_ch
        self.blocks = nn.Sequential(*blocks)
        self.head = ConvBNAct(in_ch, cfg.feature_dim, 1, 1,
                              bn_eps=cfg.bn_eps, bn_momentum=cfg.bn_momentum)
        self.final_block_channels = in_ch
        self.reset_weights()

    def reset_weights(self):
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def forward_map(self, x: torch.Tensor) -> torch.Tensor:
        """Final pre-head feature map (e.g. 7×7×320 for the default table)."""
        return self.blocks(self.stem(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """B×3×H×W normalized input → B×feature_dim pooled features."""
        if x.shape[-1] != self.cfg.input_size or x.shape[-2] != self.cfg.input_size:
            raise ValueError(
                f"expected {self.cfg.input_size}×{self.cfg.input_size} input, "
                f"got {tuple(x.shape[-2:])}")
        x = self.head(self.forward_map(x))
        return x.mean(dim=(2, 3))
