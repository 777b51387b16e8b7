"""Bundle runtimes: a literal reference executor and a deployment backend.

backend="numpy" evaluates the graph exactly as written — direct im2col/GEMM
convolutions, shift-accumulate depthwise, explicit batch-norm — and serves
as the arithmetic path independent of the training framework for parity
checks.

backend="torch" is the deployment-grade CPU runtime: at load it folds
inference-mode BatchNormalization into the preceding Conv (the constant
folding every mainstream graph runtime applies) and then executes the flat
node list with torch kernels. The bundle file itself is never modified.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ParityError
from .onnx_format import Model, Node

_INT64_MAX = (1 << 63) - 1


def _pad2d(x: np.ndarray, pads) -> np.ndarray:
    if not any(pads):
        return x
    top, left, bottom, right = pads
    return np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))


def _conv2d(x: np.ndarray, w: np.ndarray, bias, strides, pads, group: int) -> np.ndarray:
    n, c_in, _, _ = x.shape
    c_out, _, kh, kw = w.shape
    sh, sw = strides
    xp = _pad2d(x, pads)
    oh = (xp.shape[2] - kh) // sh + 1
    ow = (xp.shape[3] - kw) // sw + 1

    if kh == kw == 1 and group == 1:
        # Pointwise: one GEMM over the flattened spatial grid.
        if sh != 1 or sw != 1:
            xp = xp[:, :, ::sh, ::sw]
        flat = xp.transpose(0, 2, 3, 1).reshape(-1, c_in)
        out = flat @ w.reshape(c_out, c_in).T
        out = out.reshape(n, oh, ow, c_out).transpose(0, 3, 1, 2)
    elif group == c_in and c_out == c_in:
        # Depthwise: accumulate the k² shifted, strided views.
        out = np.zeros((n, c_out, oh, ow), dtype=np.float32)
        for di in range(kh):
            for dj in range(kw):
                view = xp[:, :, di:di + (oh - 1) * sh + 1:sh, dj:dj + (ow - 1) * sw + 1:sw]
                out += view * w[None, :, 0, di, dj, None, None]
    else:
        # General grouped conv via im2col per group.
        cg_in, cg_out = c_in // group, c_out // group
        outs = []
        for gi in range(group):
            xg = xp[:, gi * cg_in:(gi + 1) * cg_in]
            wg = w[gi * cg_out:(gi + 1) * cg_out]
            s0, s1, s2, s3 = xg.strides
            windows = np.lib.stride_tricks.as_strided(
                xg, shape=(n, cg_in, oh, ow, kh, kw),
                strides=(s0, s1, s2 * sh, s3 * sw, s2, s3), writeable=False)
            cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, cg_in * kh * kw)
            og = cols @ wg.reshape(cg_out, cg_in * kh * kw).T
            outs.append(og.reshape(n, oh, ow, cg_out).transpose(0, 3, 1, 2))
        out = np.concatenate(outs, axis=1) if group > 1 else outs[0]
    out = np.ascontiguousarray(out, dtype=np.float32)
    if bias is not None:
        out += bias[None, :, None, None]
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _slice_args(data_ndim: int, shape, starts, ends, axes=None, steps=None):
    axes = list(range(len(starts))) if axes is None else [int(a) for a in axes]
    steps = [1] * len(starts) if steps is None else [int(s) for s in steps]
    index = [slice(None)] * data_ndim
    for start, end, axis, step in zip(starts, ends, axes, steps):
        dim = shape[axis]
        end = min(int(end), dim) if end < _INT64_MAX else dim
        index[axis] = slice(int(start), end, step)
    return tuple(index)


def fold_batchnorm(model: Model) -> tuple[list[Node], dict[str, tuple]]:
    """Conv→BN pairs folded into biased convs; returns (nodes, fold plan).

    The plan maps conv node name → (scale_name, bias_name, mean_name,
    var_name, eps) so backends can adjust the conv weights they load. Only
    BN nodes whose input is produced by a Conv consumed by nothing else are
    folded; anything else is left alone.
    """
    consumers: dict[str, int] = {}
    for node in model.graph.nodes:
        for i in node.inputs:
            consumers[i] = consumers.get(i, 0) + 1
    conv_by_output = {n.outputs[0]: n for n in model.graph.nodes if n.op_type == "Conv"}
    folded_nodes: list[Node] = []
    plan: dict[str, tuple] = {}
    for node in model.graph.nodes:
        if node.op_type == "BatchNormalization":
            src = node.inputs[0]
            conv = conv_by_output.get(src)
            if conv is not None and consumers[src] == 1:
                plan[conv.name] = (node.inputs[1], node.inputs[2], node.inputs[3],
                                   node.inputs[4], float(node.attributes.get("epsilon", 1e-5)))
                # Rewire: conv now produces the BN output name directly.
                rewired = Node(op_type="Conv", inputs=list(conv.inputs),
                               outputs=[node.outputs[0]], name=conv.name,
                               attributes=dict(conv.attributes))
                folded_nodes[folded_nodes.index(conv)] = rewired
                conv_by_output[node.outputs[0]] = rewired
                continue
        folded_nodes.append(node)
    return folded_nodes, plan


class GraphExecutor:
    """Feed-forward evaluation of a parsed portable graph."""

    def __init__(self, model: Model, backend: str = "numpy"):
        if backend not in ("numpy", "torch"):
            raise ValueError(f"unknown backend {backend!r}")
        self.model = model
        self.backend = backend
        self.graph = model.graph
        self.input_info = {v.name: v for v in self.graph.inputs}
        self.output_names = [v.name for v in self.graph.outputs]
        weights = {t.name: t.array for t in self.graph.initializers}
        if backend == "torch":
            self.nodes, plan = fold_batchnorm(model)
            # Values consumed exactly once may be mutated in place by their
            # consumer (standard memory-reuse pass; weights are never eligible).
            counts: dict[str, int] = {}
            for node in self.nodes:
                for i in node.inputs:
                    counts[i] = counts.get(i, 0) + 1
            produced = {n.outputs[0] for n in self.nodes}
            self._single_use = {name for name, c in counts.items()
                                if c == 1 and name in produced}
            conv_weight_input = {n.name: n.inputs[1] for n in self.nodes
                                 if n.op_type == "Conv"}
            self._conv_fold = {}
            for conv_name, (s, b, m, v, eps) in plan.items():
                scale = weights[s] / np.sqrt(weights[v] + np.float32(eps))
                w_name = conv_weight_input[conv_name]
                folded_w = (weights[w_name] * scale[:, None, None, None]).astype(np.float32)
                folded_b = (weights[b] - weights[m] * scale).astype(np.float32)
                self._conv_fold[conv_name] = (torch.from_numpy(folded_w),
                                              torch.from_numpy(folded_b))
            self.weights = {}
            for name, arr in weights.items():
                # arr.copy() keeps 0-d shapes (ascontiguousarray would not).
                self.weights[name] = torch.from_numpy(arr.copy())
            # Constant folding: nodes fed purely by initializers (the GRU
            # gate slices, for instance) run once at load.
            remaining = []
            with torch.no_grad():
                for node in self.nodes:
                    if node.op_type != "Conv" and \
                            all(i in self.weights for i in node.inputs):
                        args = [self.weights[i] for i in node.inputs]
                        self.weights[node.outputs[0]] = \
                            self._apply_torch(node, args).contiguous()
                    else:
                        remaining.append(node)
            self.nodes = remaining
        else:
            self.nodes = list(self.graph.nodes)
            self.weights = weights
        # Liveness plan: runtime values are dropped right after their last
        # consumer, keeping peak memory at the working set.
        last_use: dict[str, int] = {}
        for idx, node in enumerate(self.nodes):
            for i in node.inputs:
                last_use[i] = idx
        keep = set(self.weights) | set(self.output_names)
        self._free_after: list[list[str]] = [[] for _ in self.nodes]
        for name, idx in last_use.items():
            if name not in keep:
                self._free_after[idx].append(name)

    def run(self, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        values = dict(self.weights)
        for name, arr in feeds.items():
            info = self.input_info.get(name)
            if info is None:
                raise ParityError(f"graph has no input named {name!r}")
            if list(arr.shape) != info.shape:
                raise ParityError(
                    f"input {name}: shape {list(arr.shape)} != declared {info.shape}")
            x = np.asarray(arr, dtype=np.float32)
            values[name] = torch.from_numpy(x) if self.backend == "torch" else x
        apply = self._apply_torch if self.backend == "torch" else self._apply_numpy
        with torch.no_grad():
            for idx, node in enumerate(self.nodes):
                args = []
                for i in node.inputs:
                    if i not in values:
                        raise ParityError(f"node {node.name}: missing input {i!r}")
                    args.append(values[i])
                values[node.outputs[0]] = apply(node, args)
                for dead in self._free_after[idx]:
                    values.pop(dead, None)
        out = {}
        for name in self.output_names:
            v = values[name]
            out[name] = v.numpy() if isinstance(v, torch.Tensor) else v
        return out

    # -- literal numpy kernels ------------------------------------------------

    def _apply_numpy(self, node, args):
        op = node.op_type
        a = node.attributes
        if op == "Conv":
            return _conv2d(args[0], args[1], args[2] if len(args) > 2 else None,
                           a.get("strides", [1, 1]), a.get("pads", [0, 0, 0, 0]),
                           a.get("group", 1))
        if op == "BatchNormalization":
            x, scale, bias, mean, var = args
            inv = scale / np.sqrt(var + np.float32(a.get("epsilon", 1e-5)))
            return (x - mean[:, None, None]) * inv[:, None, None] + bias[:, None, None]
        if op == "Clip":
            return np.clip(args[0], args[1] if len(args) > 1 else None,
                           args[2] if len(args) > 2 else None)
        if op == "Add":
            return args[0] + args[1]
        if op == "Sub":
            return args[0] - args[1]
        if op == "Mul":
            return args[0] * args[1]
        if op == "Sigmoid":
            return _sigmoid(args[0])
        if op == "Tanh":
            return np.tanh(args[0])
        if op == "Gemm":
            x, w = args[0], args[1]
            if a.get("transA", 0):
                x = x.T
            if a.get("transB", 0):
                w = w.T
            out = np.float32(a.get("alpha", 1.0)) * (x @ w)
            if len(args) > 2:
                out = out + np.float32(a.get("beta", 1.0)) * args[2]
            return out
        if op == "GlobalAveragePool":
            return args[0].mean(axis=(2, 3), keepdims=True, dtype=np.float32)
        if op == "Reshape":
            return args[0].reshape([int(d) for d in args[1]])
        if op == "Transpose":
            return np.ascontiguousarray(args[0].transpose(a["perm"]))
        if op == "Gather":
            return np.take(args[0], args[1], axis=a.get("axis", 0))
        if op == "Unsqueeze":
            out = args[0]
            for axis in sorted(int(x) for x in args[1]):
                out = np.expand_dims(out, axis)
            return out
        if op == "Slice":
            idx = _slice_args(args[0].ndim, args[0].shape, args[1], args[2],
                              args[3] if len(args) > 3 else None,
                              args[4] if len(args) > 4 else None)
            return args[0][idx]
        raise ParityError(f"node {node.name}: unsupported operator {op}")

    # -- torch deployment kernels ---------------------------------------------

    def _apply_torch(self, node, args):
        op = node.op_type
        a = node.attributes
        if op == "Conv":
            fold = self._conv_fold.get(node.name)
            if fold is not None:
                w, bias = fold
            else:
                w = args[1]
                bias = args[2] if len(args) > 2 else None
            pads = a.get("pads", [0, 0, 0, 0])
            return torch.nn.functional.conv2d(
                args[0], w, bias, stride=tuple(a.get("strides", [1, 1])),
                padding=(pads[0], pads[1]), groups=a.get("group", 1))
        if op == "BatchNormalization":
            x, scale, bias, mean, var = args
            return torch.nn.functional.batch_norm(
                x, mean, var, scale, bias, training=False,
                eps=float(a.get("epsilon", 1e-5)))
        if op == "Clip":
            lo = float(args[1]) if len(args) > 1 else None
            hi = float(args[2]) if len(args) > 2 else None
            if node.inputs[0] in self._single_use:
                return args[0].clamp_(lo, hi)
            return torch.clamp(args[0], lo, hi)
        if op == "Add":
            return args[0] + args[1]
        if op == "Sub":
            return args[0] - args[1]
        if op == "Mul":
            return args[0] * args[1]
        if op == "Sigmoid":
            return torch.sigmoid(args[0])
        if op == "Tanh":
            return torch.tanh(args[0])
        if op == "Gemm":
            x, w = args[0], args[1]
            if a.get("transA", 0):
                x = x.t()
            if a.get("transB", 0):
                w = w.t()
            out = float(a.get("alpha", 1.0)) * (x @ w)
            if len(args) > 2:
                out = out + float(a.get("beta", 1.0)) * args[2]
            return out
        if op == "GlobalAveragePool":
            return args[0].mean(dim=(2, 3), keepdim=True)
        if op == "Reshape":
            return args[0].reshape([int(d) for d in args[1]])
        if op == "Transpose":
            return args[0].permute(tuple(a["perm"])).contiguous()
        if op == "Gather":
            idx = int(args[1]) if args[1].ndim == 0 else args[1].long()
            if isinstance(idx, int):
                return args[0].select(a.get("axis", 0), idx)
            return torch.index_select(args[0], a.get("axis", 0), idx)
        if op == "Unsqueeze":
            out = args[0]
            for axis in sorted(int(x) for x in args[1]):
                out = out.unsqueeze(axis)
            return out
        if op == "Slice":
            idx = _slice_args(args[0].ndim, tuple(args[0].shape),
                              [int(v) for v in args[1]], [int(v) for v in args[2]],
                              args[3] if len(args) > 3 else None,
                              args[4] if len(args) > 4 else None)
            return args[0][idx]
        raise ParityError(f"node {node.name}: unsupported operator {op}")
