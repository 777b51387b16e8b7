"""Gated recurrent cell with the reset-gate-inside convention.

Pinned contract (shared with the exported graph):

    z = sigmoid(x W_z + b_iz + h U_z + b_hz)
    r = sigmoid(x W_r + b_ir + h U_r + b_hr)
    n = tanh(x W_n + b_in + (r * h) U_n + b_hn)
    h' = (1 - z) * h + z * n

The reset gate multiplies the previous state *before* the recurrent matrix
product. This differs from torch.nn.GRUCell, which applies r after the
product, hence the hand-written cell. Gate blocks are ordered (z, r, n) in
the stacked parameters.
"""

from __future__ import annotations

import math

import torch
from torch import nn

GATES = ("z", "r", "n")


def xavier_normal_std(fan_in: int, fan_out: int) -> float:
    return math.sqrt(2.0 / (fan_in + fan_out))


class GRUCell(nn.Module):
    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.weight_ih = nn.Parameter(torch.empty(3 * hidden_size, input_size))
        self.weight_hh = nn.Parameter(torch.empty(3 * hidden_size, hidden_size))
        self.bias_ih = nn.Parameter(torch.zeros(3 * hidden_size))
        self.bias_hh = nn.Parameter(torch.zeros(3 * hidden_size))
        self.reset_weights()

    def reset_weights(self):
        # Xavier normal per gate block, so each gate matrix sees its own
        # sqrt(2/(fan_in+fan_out)); biases start at zero.
        h = self.hidden_size
        with torch.no_grad():
            for g in range(3):
                self.weight_ih[g * h:(g + 1) * h].normal_(
                    0.0, xavier_normal_std(self.input_size, h))
                self.weight_hh[g * h:(g + 1) * h].normal_(
                    0.0, xavier_normal_std(h, h))
            self.bias_ih.zero_()
            self.bias_hh.zero_()

    def gate_tensors(self, name: str) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """(W, U, b_i, b_h) for one gate, input-major W of shape (hidden, in)."""
        g = GATES.index(name)
        h = self.hidden_size
        sl = slice(g * h, (g + 1) * h)
        return self.weight_ih[sl], self.weight_hh[sl], self.bias_ih[sl], self.bias_hh[sl]

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        hs = self.hidden_size
        gi = torch.addmm(self.bias_ih, x, self.weight_ih.t())
        iz, ir, inn = gi[:, :hs], gi[:, hs:2 * hs], gi[:, 2 * hs:]
        z = torch.sigmoid(iz + torch.addmm(self.bias_hh[:hs], h, self.weight_hh[:hs].t()))
        r = torch.sigmoid(ir + torch.addmm(self.bias_hh[hs:2 * hs], h, self.weight_hh[hs:2 * hs].t()))
        n = torch.tanh(inn + torch.addmm(self.bias_hh[2 * hs:], r * h, self.weight_hh[2 * hs:].t()))
        return (1.0 - z) * h + z * n
