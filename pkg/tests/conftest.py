import numpy as np
import pytest
import torch

from phaserec.data.manifest import PhaseSet, make_splits
from phaserec.data.synth import PhaseDuration, synthesize_dataset
from phaserec.model.checkpoint import save_checkpoint
from phaserec.model.config import default_config, tiny_config
from phaserec.model.network import build_model

torch.set_num_threads(2)

PHASES5 = ("prep", "anesthetic", "incision", "excision", "inspection")


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory):
    """Small deterministic 5-phase dataset, 3/1/1 split, ~8 s per phase."""
    out = tmp_path_factory.mktemp("synth")
    durations = [PhaseDuration(8.0, 2.0) for _ in PHASES5]
    manifest = synthesize_dataset(5, PhaseSet(PHASES5), durations,
                                  seed=11, out_dir=out, fps=1.0,
                                  frame_size=(160, 120))
    manifest = make_splits(manifest, (3, 1, 1), seed=11)
    manifest.save(out / "manifest.json")
    return manifest


@pytest.fixture(scope="session")
def tiny_model():
    cfg = tiny_config(num_classes=5, t=10, input_size=64)
    return build_model(cfg, init_seed=3).eval()


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "tiny.ckpt"
    save_checkpoint(tiny_model, path, phases=list(PHASES5))
    return path


@pytest.fixture(scope="session")
def default_model():
    return build_model(default_config(num_classes=7, t=10), init_seed=0).eval()


@pytest.fixture(scope="session")
def default_checkpoint(default_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "default.ckpt"
    save_checkpoint(default_model, path, phases=[f"p{i}" for i in range(7)])
    return path


def random_frames(n, h=73, w=73, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8) for _ in range(n)]
