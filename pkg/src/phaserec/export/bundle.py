"""Checkpoint → portable static graph (ONNX, pinned opset).

The emitted graph takes one normalized (1, t, H, W, 3) float32 window and
returns (1, C) logits. The backbone runs the t frames as a batch, the GRU
is unrolled (fixed t maximizes downstream runtime compatibility), and the
head runs on the final hidden state. Every learned tensor is stored under
its checkpoint name with identical bytes; structural constants live under
"const.". Model metadata embeds both configs, the normalization constants,
t and the phase names, so a bundle is self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ExportError
from ..model.checkpoint import read_tensors
from ..model.config import ModelConfig
from .onnx_format import FLOAT32, Graph, Model, Node, Tensor, ValueInfo

OPSET = 13
IR_VERSION = 7
METADATA_PREFIX = "phaserec."
PRODUCER_VERSION = "0.1.0"

INPUT_NAME = "frames"
OUTPUT_NAME = "logits"


@dataclass
class ExportBundle:
    path: Path
    metadata: dict
    opset: int = OPSET
    producer_version: str = PRODUCER_VERSION

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.metadata["model"])

    @property
    def phases(self) -> list[str]:
        return self.metadata.get("phases", [])


class _GraphBuilder:
    def __init__(self):
        self.nodes: list[Node] = []
        self.initializers: list[Tensor] = []
        self._const_cache: dict[str, str] = {}

    def add(self, op: str, inputs: list[str], output: str, **attrs) -> str:
        self.nodes.append(Node(op_type=op, inputs=inputs, outputs=[output],
                               name=output, attributes=attrs))
        return output

    def tensor(self, name: str, array: np.ndarray) -> str:
        self.initializers.append(Tensor(name=name, array=array))
        return name

    def const(self, name: str, array: np.ndarray) -> str:
        if name not in self._const_cache:
            self.tensor(name, array)
            self._const_cache[name] = name
        return name

    def const_i64(self, name: str, values) -> str:
        return self.const(name, np.asarray(values, dtype=np.int64))

    def const_f32_scalar(self, name: str, value: float) -> str:
        return self.const(name, np.asarray(value, dtype=np.float32))


def _conv_bn_act(g: _GraphBuilder, tensors, prefix: str, x: str, out: str,
                 kernel: int, stride: int, groups: int = 1, act: bool = True,
                 bn_eps: float = 1e-3) -> str:
    w = f"{prefix}.0.weight"
    if w not in tensors:
        raise ExportError(f"missing conv weight {w}")
    g.tensor(w, tensors[w])
    pad = kernel // 2
    conv = g.add("Conv", [x, w], f"{out}_conv", strides=[stride, stride],
                 pads=[pad, pad, pad, pad], group=groups,
                 kernel_shape=[kernel, kernel], dilations=[1, 1])
    bn_inputs = [conv]
    for part in ("weight", "bias", "running_mean", "running_var"):
        name = f"{prefix}.1.{part}"
        g.tensor(name, tensors[name])
        bn_inputs.append(name)
    bn = g.add("BatchNormalization", bn_inputs, f"{out}_bn", epsilon=bn_eps)
    if not act:
        return bn
    zero = g.const_f32_scalar("const.zero", 0.0)
    six = g.const_f32_scalar("const.six", 6.0)
    return g.add("Clip", [bn, zero, six], out)


def _backbone(g: _GraphBuilder, cfg: ModelConfig, tensors, x: str) -> str:
    bb = cfg.backbone
    x = _conv_bn_act(g, tensors, "backbone.stem", x, "stem", kernel=3, stride=2,
                     bn_eps=bb.bn_eps)
    in_ch = bb.stem_channels
    block_idx = 0
    for stage_idx, spec in enumerate(bb.stages):
        out_ch = bb.scaled_channels(spec.out_channels)
        for rep in range(bb.scaled_repeats(spec, stage_idx)):
            stride = spec.stride if rep == 0 else 1
            base = f"backbone.blocks.{block_idx}"
            tag = f"b{block_idx}"
            if spec.block == "mbconv":
                mid = in_ch * spec.expand_ratio
                layer = 0
                h = x
                if spec.expand_ratio != 1:
                    h = _conv_bn_act(g, tensors, f"{base}.block.{layer}", h,
                                     f"{tag}_expand", kernel=1, stride=1,
                                     bn_eps=bb.bn_eps)
                    layer += 1
                h = _conv_bn_act(g, tensors, f"{base}.block.{layer}", h,
                                 f"{tag}_dw", kernel=spec.kernel, stride=stride,
                                 groups=mid, bn_eps=bb.bn_eps)
                layer += 1
                h = _conv_bn_act(g, tensors, f"{base}.block.{layer}", h,
                                 f"{tag}_proj", kernel=1, stride=1, act=False,
                                 bn_eps=bb.bn_eps)
                if stride == 1 and in_ch == out_ch:
                    h = g.add("Add", [h, x], f"{tag}_res")
                x = h
            elif spec.block == "plain-conv":
                x = _conv_bn_act(g, tensors, base, x, f"{tag}_conv",
                                 kernel=spec.kernel, stride=stride,
                                 bn_eps=bb.bn_eps)
            else:
                raise ExportError(
                    f"stage {stage_idx}: no portable encoding for block type {spec.block!r}")
            in_ch = out_ch
            block_idx += 1
    return _conv_bn_act(g, tensors, "backbone.head", x, "head_conv", kernel=1,
                        stride=1, bn_eps=bb.bn_eps)


def _gate_slices(g: _GraphBuilder, tensors, hidden: int):
    """Per-gate views of the stacked GRU parameters; gate order (z, r, n)."""
    for name in ("gru.weight_ih", "gru.weight_hh", "gru.bias_ih", "gru.bias_hh"):
        g.tensor(name, tensors[name])
    axis0 = g.const_i64("const.axis0", [0])
    views = {}
    for gate_idx, gate in enumerate(("z", "r", "n")):
        start = g.const_i64(f"const.gate_{gate}_start", [gate_idx * hidden])
        end = g.const_i64(f"const.gate_{gate}_end", [(gate_idx + 1) * hidden])
        views[gate] = {
            "W": g.add("Slice", ["gru.weight_ih", start, end, axis0], f"gru_W{gate}"),
            "U": g.add("Slice", ["gru.weight_hh", start, end, axis0], f"gru_U{gate}"),
            "bi": g.add("Slice", ["gru.bias_ih", start, end, axis0], f"gru_bi{gate}"),
            "bh": g.add("Slice", ["gru.bias_hh", start, end, axis0], f"gru_bh{gate}"),
        }
    return views


def _gru_unrolled(g: _GraphBuilder, cfg: ModelConfig, tensors, feats: str) -> str:
    hidden = cfg.temporal.hidden_units
    t = cfg.temporal.t
    gates = _gate_slices(g, tensors, hidden)
    axes0 = g.const_i64("const.axes0", [0])
    one = g.const_f32_scalar("const.one", 1.0)
    h = g.const("const.h0", np.zeros((1, hidden), dtype=np.float32))
    for k in range(t):
        idx = g.const("const.idx_%d" % k, np.asarray(k, dtype=np.int64))
        row = g.add("Gather", [feats, idx], f"x{k}_row", axis=0)
        x = g.add("Unsqueeze", [row, axes0], f"x{k}")
        gz, gr, gn = gates["z"], gates["r"], gates["n"]
        iz = g.add("Gemm", [x, gz["W"], gz["bi"]], f"s{k}_iz", transB=1)
        hz = g.add("Gemm", [h, gz["U"], gz["bh"]], f"s{k}_hz", transB=1)
        z = g.add("Sigmoid", [g.add("Add", [iz, hz], f"s{k}_zpre")], f"s{k}_z")
        ir = g.add("Gemm", [x, gr["W"], gr["bi"]], f"s{k}_ir", transB=1)
        hr = g.add("Gemm", [h, gr["U"], gr["bh"]], f"s{k}_hr", transB=1)
        r = g.add("Sigmoid", [g.add("Add", [ir, hr], f"s{k}_rpre")], f"s{k}_r")
        inx = g.add("Gemm", [x, gn["W"], gn["bi"]], f"s{k}_in", transB=1)
        rh = g.add("Mul", [r, h], f"s{k}_rh")
        hn = g.add("Gemm", [rh, gn["U"], gn["bh"]], f"s{k}_hn", transB=1)
        n = g.add("Tanh", [g.add("Add", [inx, hn], f"s{k}_npre")], f"s{k}_n")
        omz = g.add("Sub", [one, z], f"s{k}_omz")
        keep = g.add("Mul", [omz, h], f"s{k}_keep")
        update = g.add("Mul", [z, n], f"s{k}_update")
        h = g.add("Add", [keep, update], f"s{k}_h")
    return h


def _head(g: _GraphBuilder, cfg: ModelConfig, tensors, h: str) -> str:
    zero = g.const_f32_scalar("const.zero", 0.0)
    six = g.const_f32_scalar("const.six", 6.0)
    x = g.add("Clip", [h, zero, six], "head_act")
    if cfg.temporal.head_hidden:
        for part in ("weight", "bias"):
            g.tensor(f"pre_head.{part}", tensors[f"pre_head.{part}"])
        x = g.add("Gemm", [x, "pre_head.weight", "pre_head.bias"], "pre_head_out", transB=1)
        x = g.add("Clip", [x, zero, six], "pre_head_act")
    for part in ("weight", "bias"):
        g.tensor(f"head.{part}", tensors[f"head.{part}"])
    return g.add("Gemm", [x, "head.weight", "head.bias"], OUTPUT_NAME, transB=1)


def build_model_proto(header: dict, tensors: dict[str, np.ndarray]) -> Model:
    cfg = ModelConfig.from_dict(header["model"])
    t, size = cfg.temporal.t, cfg.backbone.input_size
    g = _GraphBuilder()
    thwc = g.add("Reshape", [INPUT_NAME, g.const_i64("const.shape_thwc", [t, size, size, 3])],
                 "x_thwc")
    tchw = g.add("Transpose", [thwc], "x_tchw", perm=[0, 3, 1, 2])
    fmap = _backbone(g, cfg, tensors, tchw)
    pooled = g.add("GlobalAveragePool", [fmap], "pooled")
    feats = g.add("Reshape", [pooled, g.const_i64("const.shape_feats",
                                                  [t, cfg.backbone.feature_dim])], "feats")
    h_final = _gru_unrolled(g, cfg, tensors, feats)
    _head(g, cfg, tensors, h_final)

    metadata = {
        f"{METADATA_PREFIX}model_config": json.dumps(header["model"]),
        f"{METADATA_PREFIX}phases": json.dumps(header.get("phases", [])),
        f"{METADATA_PREFIX}t": str(t),
        f"{METADATA_PREFIX}normalization": json.dumps(
            {"mean": list(cfg.norm_mean), "std": list(cfg.norm_std),
             "resize_size": cfg.backbone.resize_size,
             "crop_size": cfg.backbone.input_size}),
        f"{METADATA_PREFIX}opset": str(OPSET),
        f"{METADATA_PREFIX}producer_version": PRODUCER_VERSION,
    }
    graph = Graph(
        name="phase_window_classifier",
        nodes=g.nodes,
        inputs=[ValueInfo(INPUT_NAME, FLOAT32, [1, t, size, size, 3])],
        outputs=[ValueInfo(OUTPUT_NAME, FLOAT32, [1, cfg.temporal.num_classes])],
        initializers=g.initializers,
    )
    return Model(graph=graph, opset=OPSET, ir_version=IR_VERSION,
                 producer_version=PRODUCER_VERSION, metadata=metadata)


def export_portable(checkpoint_path: str | Path, out_path: str | Path) -> ExportBundle:
    """Convert a checkpoint into a self-describing portable graph file."""
    header, tensors = read_tensors(checkpoint_path)
    model = build_model_proto(header, tensors)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(model.encode())
    return ExportBundle(path=out_path,
                        metadata={"model": header["model"],
                                  "phases": header.get("phases", [])})


def load_bundle(path: str | Path) -> tuple[Model, ExportBundle]:
    """Parse a bundle file; metadata alone must suffice to run it."""
    path = Path(path)
    model = Model.decode(path.read_bytes())
    meta = model.metadata
    try:
        bundle = ExportBundle(
            path=path,
            metadata={
                "model": json.loads(meta[f"{METADATA_PREFIX}model_config"]),
                "phases": json.loads(meta.get(f"{METADATA_PREFIX}phases", "[]")),
                "normalization": json.loads(meta[f"{METADATA_PREFIX}normalization"]),
                "t": int(meta[f"{METADATA_PREFIX}t"]),
            },
            opset=model.opset,
            producer_version=model.producer_version,
        )
    except KeyError as exc:
        raise ExportError(f"{path}: bundle metadata incomplete ({exc})") from exc
    return model, bundle
