import json

import pytest
import torch

from phaserec.errors import CheckpointLoadError
from phaserec.model.checkpoint import (MAGIC, FORMAT_VERSION, load_checkpoint,
                                       load_tensors_into, read_header,
                                       read_tensors, save_checkpoint)
from phaserec.model.config import ModelConfig, tiny_config
from phaserec.model.network import build_model


def test_round_trip_is_bitwise(tiny_model, tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(tiny_model, path, phases=["a", "b", "c", "d", "e"],
                    extra={"note": 1})
    loaded, header = load_checkpoint(path)
    src = tiny_model.state_dict()
    dst = loaded.state_dict()
    for name, tensor in src.items():
        if name.endswith("num_batches_tracked"):
            continue
        assert torch.equal(tensor, dst[name]), name
    assert header["phases"] == ["a", "b", "c", "d", "e"]
    assert header["extra"] == {"note": 1}
    assert ModelConfig.from_dict(header["model"]) == tiny_model.cfg


def test_loaded_model_reproduces_logits(tiny_model, tiny_checkpoint):
    loaded, _ = load_checkpoint(tiny_checkpoint)
    x = torch.randn(1, 10, 64, 64, 3)
    with torch.no_grad():
        assert torch.equal(tiny_model(x), loaded(x))


def test_header_layout_and_magic(tiny_checkpoint):
    raw = tiny_checkpoint.read_bytes()
    assert raw[:4] == MAGIC
    assert int.from_bytes(raw[4:8], "little") == FORMAT_VERSION
    header = read_header(tiny_checkpoint)
    assert header["format"] == "phaserec-tensor-archive"
    names = [t["name"] for t in header["tensors"]]
    assert "gru.weight_ih" in names and "head.weight" in names
    assert not any(n.endswith("num_batches_tracked") for n in names)


def test_mismatched_config_lists_offending_tensors(tmp_path):
    model = build_model(tiny_config(num_classes=5, t=2), init_seed=0)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    # Rewrite the header claiming 7 classes; the stored head tensors no
    # longer match the profile the config demands.
    raw = path.read_bytes()
    header_len = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16:16 + header_len])
    header["model"]["temporal"]["num_classes"] = 7
    new_header = json.dumps(header).encode()
    path.write_bytes(raw[:8] + len(new_header).to_bytes(8, "little")
                     + new_header + raw[16 + header_len:])
    with pytest.raises(CheckpointLoadError) as err:
        load_checkpoint(path)
    assert any("head" in item for item in err.value.offending)


def test_truncated_payload_detected(tiny_checkpoint, tmp_path):
    raw = tiny_checkpoint.read_bytes()
    clipped = tmp_path / "clipped.ckpt"
    clipped.write_bytes(raw[:-64])
    with pytest.raises(CheckpointLoadError):
        read_tensors(clipped)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\0" * 32)
    with pytest.raises(CheckpointLoadError, match="magic"):
        read_header(path)


def test_load_tensors_into_backbone_prefix(tiny_model, tiny_checkpoint):
    fresh = build_model(tiny_model.cfg, init_seed=99)
    before = fresh.backbone.stem[0].weight.clone()
    load_tensors_into(fresh.backbone, tiny_checkpoint, prefix="backbone.")
    after = fresh.backbone.stem[0].weight
    assert not torch.equal(before, after)
    assert torch.equal(after, tiny_model.backbone.stem[0].weight)


def test_load_tensors_into_rejects_wrong_shapes(tiny_checkpoint):
    other = build_model(tiny_config(num_classes=5, t=2, input_size=32,
                                    hidden_units=8), init_seed=0)
    with pytest.raises(CheckpointLoadError):
        load_tensors_into(other.gru, tiny_checkpoint, prefix="gru.")


def test_build_model_backbone_weights_round_trip(tiny_model, tiny_checkpoint):
    fresh = build_model(tiny_model.cfg, init_seed=123,
                        backbone_weights=str(tiny_checkpoint))
    assert torch.equal(fresh.backbone.head[0].weight,
                       tiny_model.backbone.head[0].weight)
    assert not torch.equal(fresh.gru.weight_ih, tiny_model.gru.weight_ih)
