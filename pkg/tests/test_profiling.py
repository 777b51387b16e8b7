import hashlib
import time

import numpy as np
import pytest
import torch

from phaserec.errors import CostModelError
from phaserec.model.config import (BackboneConfig, ModelConfig, StageSpec,
                                   TemporalConfig, default_config, tiny_config)
from phaserec.profiling import (backbone_macs_per_frame, conv_macs, count_macs,
                                dense_macs, gru_step_macs, measure_latency,
                                model_size)


def test_conv_cost_closed_form():
    # 3×3 conv, 1→8 channels, 224×224, stride 1, padded.
    assert conv_macs(224, 224, 8, 3, 1) == 3_612_672


def test_gru_cost_closed_form():
    cfg = default_config()
    assert 10 * gru_step_macs(cfg) == 10 * 3 * (1280 * 128 + 128 * 128) == 5_406_720


def test_default_sequence_macs_near_reference():
    total = count_macs(default_config(), t=10)
    assert abs(total - 4.04e9) / 4.04e9 < 0.05


def test_macs_linear_in_t():
    cfg = default_config()
    per_frame = backbone_macs_per_frame(cfg) + gru_step_macs(cfg)
    assert count_macs(cfg, 20) - count_macs(cfg, 10) == 10 * per_frame
    assert count_macs(cfg, 1) == per_frame + dense_macs(128, 7)


def test_unknown_block_type_raises_cost_error():
    spec = StageSpec("mbconv", 1, 3, 1, 8, 1)
    object.__setattr__(spec, "block", "exotic")
    bb = BackboneConfig.__new__(BackboneConfig)
    object.__setattr__(bb, "stages", (spec,))
    for field_name, value in (("input_size", 32), ("resize_size", 37),
                              ("stem_channels", 8), ("feature_dim", 32),
                              ("width_mult", 1.0), ("depth_mult", 1.0),
                              ("bn_eps", 1e-3), ("bn_momentum", 0.1)):
        object.__setattr__(bb, field_name, value)
    cfg = ModelConfig(backbone=bb, temporal=TemporalConfig(num_classes=3, t=2))
    with pytest.raises(CostModelError, match="exotic"):
        count_macs(cfg, 2)


# -- latency harness -----------------------------------------------------------

def test_known_delay_calibration():
    stats = measure_latency(lambda clip: time.sleep(0.050), [np.zeros(1)],
                            runs=5, warmup=1)
    assert 50.0 <= stats.mean_ms <= 60.0
    assert len(stats.runs_ms) == 5


def test_requested_run_count_is_honored():
    stats = measure_latency(lambda clip: None, [np.zeros(1)], runs=10, warmup=3)
    assert len(stats.runs_ms) == 10
    assert stats.warmup == 3


def test_single_run_mean_is_that_timing():
    stats = measure_latency(lambda clip: time.sleep(0.01), [np.zeros(1)],
                            runs=1, warmup=0)
    assert stats.mean_ms == stats.runs_ms[0]


def test_mean_is_plain_arithmetic_mean():
    stats = measure_latency(lambda clip: None, [np.zeros(1)], runs=7, warmup=0)
    assert stats.mean_ms == pytest.approx(sum(stats.runs_ms) / 7)


def test_environment_descriptor_recorded():
    stats = measure_latency(lambda clip: None, [np.zeros(1)], runs=1, warmup=0)
    env = stats.environment
    assert "cpu_model" in env and "cpu_count" in env
    assert isinstance(env["core_pinned"], bool)


def test_profiling_does_not_mutate_parameters(tiny_model):
    def digest():
        h = hashlib.sha256()
        for _, p in sorted(tiny_model.state_dict().items()):
            h.update(p.numpy().tobytes())
        return h.hexdigest()

    before = digest()
    clip = np.zeros((1, 10, 64, 64, 3), dtype=np.float32)

    def runnable(x):
        with torch.no_grad():
            return tiny_model(torch.from_numpy(x))

    measure_latency(runnable, [clip], runs=2, warmup=1)
    count_macs(tiny_model.cfg)
    assert digest() == before


# -- checkpoint size -----------------------------------------------------------

def test_model_size_is_exact_file_size(tiny_checkpoint):
    assert model_size(tiny_checkpoint) == tiny_checkpoint.stat().st_size


def test_model_size_missing_file():
    with pytest.raises(FileNotFoundError):
        model_size("/nonexistent/nope.ckpt")


def test_size_decomposes_into_header_plus_payload(tiny_checkpoint, tiny_model):
    from phaserec.model.checkpoint import read_header
    header = read_header(tiny_checkpoint)
    payload = sum(item["nbytes"] for item in header["tensors"])
    assert model_size(tiny_checkpoint) == header["_payload_start"] + payload
    stored_entries = payload // 4
    trainable = sum(p.numel() for p in tiny_model.parameters())
    buffers = sum(b.numel() for n, b in tiny_model.named_buffers()
                  if not n.endswith("num_batches_tracked"))
    assert stored_entries == trainable + buffers
