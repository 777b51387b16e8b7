import numpy as np
import pytest
from PIL import Image

from phaserec.data.frames import load_frames, read_annotations
from phaserec.data.manifest import PhaseSet
from phaserec.data.synth import PhaseDuration, render_frame, synthesize_dataset
from phaserec.errors import ConfigError


def _counts(manifest, entry):
    labels = read_annotations(entry.annotations, manifest.phase_set)
    return np.bincount(labels, minlength=len(manifest.phase_set))


def test_zero_variance_durations_give_exact_counts(tmp_path):
    ps = PhaseSet(("a", "b"))
    durations = [PhaseDuration(4.0, 0.0), PhaseDuration(7.0, 0.0)]
    m = synthesize_dataset(1, ps, durations, seed=0, out_dir=tmp_path,
                           fps=2.0, frame_size=(64, 48))
    counts = _counts(m, m.entries[0])
    assert counts.tolist() == [8, 14]  # duration × fps exactly
    frames = load_frames(m.entries[0], sampling_fps=2.0)
    assert len(frames) == 22


def test_annotation_counts_proportional_to_durations(tmp_path):
    ps = PhaseSet(("p0", "p1", "p2", "p3", "p4"))
    means = (27.2, 39.2, 15.1, 32.3, 12.3)
    durations = [PhaseDuration(m, 0.0) for m in means]
    m = synthesize_dataset(2, ps, durations, seed=1, out_dir=tmp_path,
                           fps=1.0, frame_size=(64, 48))
    for entry in m.entries:
        counts = _counts(m, entry)
        assert counts.tolist() == [round(x) for x in means]


def test_generator_is_deterministic(tmp_path):
    ps = PhaseSet(("a", "b", "c"))
    durations = [PhaseDuration(3.0, 1.0)] * 3
    m1 = synthesize_dataset(2, ps, durations, seed=42, out_dir=tmp_path / "x",
                            fps=1.0, frame_size=(48, 32))
    m2 = synthesize_dataset(2, ps, durations, seed=42, out_dir=tmp_path / "y",
                            fps=1.0, frame_size=(48, 32))
    for e1, e2 in zip(m1.entries, m2.entries):
        f1 = load_frames(e1, 1.0)
        f2 = load_frames(e2, 1.0)
        assert len(f1) == len(f2)
        for a, b in zip(f1, f2):
            assert np.array_equal(a.pixels, b.pixels)
        assert read_annotations(e1.annotations, m1.phase_set) == \
            read_annotations(e2.annotations, m2.phase_set)


def test_phases_render_distinct_dominant_colors():
    frames = [render_frame(p, 5, t_s=3.0, size=(64, 48)) for p in range(5)]
    means = [f.reshape(-1, 3).mean(axis=0) for f in frames]
    for i in range(5):
        for j in range(i + 1, 5):
            assert np.abs(means[i] - means[j]).max() > 8.0


def test_marker_moves_between_frames():
    a = render_frame(0, 5, t_s=0.0, size=(64, 48))
    b = render_frame(0, 5, t_s=5.0, size=(64, 48))
    assert (a != b).any()


def test_manifest_and_files_exist(tmp_path):
    ps = PhaseSet(("a", "b"))
    m = synthesize_dataset(1, ps, [PhaseDuration(2.0), PhaseDuration(2.0)],
                           seed=3, out_dir=tmp_path, fps=1.0, frame_size=(32, 24))
    assert (tmp_path / "manifest.json").exists()
    entry = m.entries[0]
    pngs = sorted((tmp_path / "videos" / entry.video_id).glob("*.png"))
    assert len(pngs) == 4
    with Image.open(pngs[0]) as im:
        assert im.size == (32, 24)


def test_invalid_theme_rejected(tmp_path):
    with pytest.raises(ConfigError):
        synthesize_dataset(1, PhaseSet(("a", "b")), None, visual_theme="plasma",
                           seed=0, out_dir=tmp_path)


def test_rings_theme_supported(tmp_path):
    m = synthesize_dataset(1, PhaseSet(("a", "b")),
                           [PhaseDuration(2.0), PhaseDuration(1.0)],
                           visual_theme="rings", seed=0, out_dir=tmp_path,
                           fps=1.0, frame_size=(32, 24))
    assert len(load_frames(m.entries[0], 1.0)) == 3
