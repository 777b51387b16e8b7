"""Named-tensor checkpoint archive.

Layout: 4-byte magic, u32 format version, u64 header length, UTF-8 JSON
header, then the concatenated little-endian float32 tensor payload. The
header embeds the full model configuration, normalization constants, phase
names and a name → (shape, offset, nbytes) index, so a checkpoint is
self-describing. This file is the contract between training, export and
profiling.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointLoadError
from .config import ModelConfig

MAGIC = b"PRTA"
FORMAT_VERSION = 1

# Integer bookkeeping buffers (BatchNorm batch counters) are derivable and
# not archived; everything else in state_dict is float32.
_SKIP_SUFFIX = ".num_batches_tracked"


def _stored_items(model: torch.nn.Module):
    for name, tensor in model.state_dict().items():
        if name.endswith(_SKIP_SUFFIX):
            continue
        yield name, tensor


def save_checkpoint(model, path: str | Path, phases: list[str] | None = None,
                    extra: dict | None = None) -> None:
    """Atomic write (temp + rename) of the model and its metadata."""
    path = Path(path)
    index = []
    chunks = []
    offset = 0
    for name, tensor in _stored_items(model):
        arr = tensor.detach().cpu().to(torch.float32).numpy().astype("<f4")
        raw = arr.tobytes()
        index.append({"name": name, "shape": list(arr.shape),
                      "dtype": "f32", "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format": "phaserec-tensor-archive",
        "version": FORMAT_VERSION,
        "model": model.cfg.to_dict(),
        "phases": list(phases) if phases else [],
        "extra": extra or {},
        "tensors": index,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(FORMAT_VERSION.to_bytes(4, "little"))
            f.write(len(header_bytes).to_bytes(8, "little"))
            f.write(header_bytes)
            for raw in chunks:
                f.write(raw)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def read_header(path: str | Path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointLoadError(f"{path}: bad magic {magic!r}")
        version = int.from_bytes(f.read(4), "little")
        if version != FORMAT_VERSION:
            raise CheckpointLoadError(f"{path}: unsupported format version {version}")
        header_len = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(header_len).decode("utf-8"))
        header["_payload_start"] = 16 + header_len
    return header


def read_tensors(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Header plus every archived tensor as float32 ndarrays."""
    header = read_header(path)
    tensors = {}
    with open(path, "rb") as f:
        for item in header["tensors"]:
            f.seek(header["_payload_start"] + item["offset"])
            raw = f.read(item["nbytes"])
            if len(raw) != item["nbytes"]:
                raise CheckpointLoadError(f"{path}: truncated payload at {item['name']}",
                                          offending=[item["name"]])
            tensors[item["name"]] = np.frombuffer(raw, dtype="<f4").reshape(item["shape"]).copy()
    return header, tensors


def load_checkpoint(path: str | Path):
    """Rebuild the model from the embedded config and load every tensor.

    Returns (model, header). Shape or name mismatches raise
    CheckpointLoadError listing the offending tensors.
    """
    from .network import build_model

    header, tensors = read_tensors(path)
    cfg = ModelConfig.from_dict(header["model"])
    model = build_model(cfg, init_seed=0)
    state = model.state_dict()
    expected = {n for n, _ in _stored_items(model)}
    got = set(tensors)
    bad = sorted(
        [f"missing:{n}" for n in expected - got]
        + [f"unexpected:{n}" for n in got - expected]
        + [f"shape:{n}({list(tensors[n].shape)}!={list(state[n].shape)})"
           for n in expected & got if list(tensors[n].shape) != list(state[n].shape)]
    )
    if bad:
        raise CheckpointLoadError(f"{path}: checkpoint does not match its config", offending=bad)
    for name, arr in tensors.items():
        state[name] = torch.from_numpy(arr)
    model.load_state_dict(state)
    model.eval()
    return model, header


def load_tensors_into(module: torch.nn.Module, path: str | Path, prefix: str = "") -> None:
    """Load a subset of archived tensors (names under prefix) into a module."""
    _, tensors = read_tensors(path)
    state = module.state_dict()
    bad = []
    picked = {}
    for name, arr in tensors.items():
        if not name.startswith(prefix):
            continue
        local = name[len(prefix):]
        if local not in state:
            continue
        if list(arr.shape) != list(state[local].shape):
            bad.append(f"shape:{local}({list(arr.shape)}!={list(state[local].shape)})")
        else:
            picked[local] = torch.from_numpy(arr)
    if bad:
        raise CheckpointLoadError(f"{path}: tensor shapes do not match", offending=bad)
    if not picked:
        raise CheckpointLoadError(f"{path}: no tensors under prefix {prefix!r}")
    state.update(picked)
    module.load_state_dict(state)
