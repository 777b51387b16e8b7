"""Training recipe: SGD with momentum on sequence cross-entropy, sequence-wise
augmentation, best-validation checkpointing, multi-run averaging."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data.augment import AugmentPolicy, augment_sequence
from .data.clips import ClipSequence, build_clips
from .data.frames import load_frames, read_annotations
from .data.manifest import DatasetManifest, ManifestEntry
from .errors import ConfigError, NumericError
from .geometry import preprocess, normalize
from .model.checkpoint import save_checkpoint
from .model.config import ModelConfig
from .model.network import build_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    batch_size: int = 32
    lr: float = 5e-4
    momentum: float = 0.9
    num_runs: int = 3
    seeds: tuple[int, ...] = (0, 1, 2)
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    lr_step_epochs: int = 0      # 0 = constant learning rate
    lr_step_gamma: float = 0.1
    clip_stride: int = 1         # per-video clip subsampling for epoch cost
    early_stop_train_acc: float | None = None
    device: str = "cpu"

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.num_runs < 1:
            raise ConfigError(f"num_runs must be >= 1, got {self.num_runs}")
        if len(self.seeds) < self.num_runs:
            raise ConfigError(f"{self.num_runs} runs need {self.num_runs} seeds, "
                              f"got {len(self.seeds)}")


@dataclass
class RunRecord:
    seed: int
    train_loss: list[float]
    train_acc: list[float]
    val_acc: list[float]
    best_val_acc: float
    best_epoch: int
    checkpoint: str
    wall_time_s: float

    def to_dict(self) -> dict:
        return asdict(self)


class VideoClips:
    """Preprocessed frames of one video, cached at the model's geometry."""

    def __init__(self, entry: ManifestEntry, manifest: DatasetManifest, cfg: ModelConfig):
        frames = load_frames(entry, manifest.sampling_fps)
        labels = read_annotations(entry.annotations, manifest.phase_set)
        if len(labels) != len(frames):
            raise ConfigError(
                f"{entry.video_id}: {len(frames)} frames but {len(labels)} annotations")
        size = cfg.backbone.resize_size
        self.video_id = entry.video_id
        self.cfg = cfg
        # Pre-crop geometry; augmentation (train) or center crop (eval) follows.
        self.frames = [preprocess(f.pixels, size, size) for f in frames]
        self.labels = labels

    def clips(self, t: int, stride: int = 1) -> list[ClipSequence]:
        return build_clips(self.frames, self.labels, self.video_id, t=t, stride=stride)


def _center_crop_clip(clip: ClipSequence, crop: int) -> np.ndarray:
    h, w = clip.frames.shape[1:3]
    r0, c0 = (h - crop) // 2, (w - crop) // 2
    return clip.frames[:, r0:r0 + crop, c0:c0 + crop, :].astype(np.float32)


def clip_batch_tensor(clips: list[ClipSequence], cfg: ModelConfig,
                      policy: AugmentPolicy | None = None,
                      rng: np.random.Generator | None = None) -> torch.Tensor:
    """Stack clips into a normalized B×t×H×W×3 float tensor.

    With a policy, one augmentation draw is applied per clip; without, the
    deterministic center crop is used.
    """
    crop = cfg.backbone.input_size
    arrays = []
    for clip in clips:
        if policy is not None:
            px = augment_sequence(clip, policy, rng).frames
        else:
            px = _center_crop_clip(clip, crop)
        x = px.astype(np.float32) / np.float32(255.0)
        x = (x - np.asarray(cfg.norm_mean, dtype=np.float32)) / \
            np.asarray(cfg.norm_std, dtype=np.float32)
        arrays.append(x)
    return torch.from_numpy(np.stack(arrays))


def load_split(manifest: DatasetManifest, split: str, cfg: ModelConfig) -> list[VideoClips]:
    return [VideoClips(e, manifest, cfg) for e in manifest.split(split)]


def _clip_accuracy(model, videos: list[VideoClips], cfg: ModelConfig,
                   batch_size: int, stride: int = 1) -> float:
    model.eval()
    correct = total = 0
    with torch.no_grad():
        for video in videos:
            clips = video.clips(cfg.temporal.t, stride=stride)
            for i in range(0, len(clips), batch_size):
                chunk = clips[i:i + batch_size]
                x = clip_batch_tensor(chunk, cfg)
                pred = model(x).argmax(dim=1)
                labels = torch.tensor([c.label for c in chunk])
                correct += int((pred == labels).sum())
                total += len(chunk)
    return correct / max(total, 1)


def train_single_run(cfg: ModelConfig, manifest: DatasetManifest, train_cfg: TrainConfig,
                     seed: int, out_dir: str | Path) -> RunRecord:
    """One seeded run: init → epochs of shuffled augmented batches → best-val
    checkpoint. All RNG (init, shuffle, augment, dropout) derives from seed."""
    start = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_videos = load_split(manifest, "train", cfg)
    val_videos = load_split(manifest, "val", cfg)
    if not train_videos:
        raise ConfigError("manifest has no train split")

    policy = AugmentPolicy(crop_size=cfg.backbone.input_size,
                           h_flip_prob=train_cfg.augment.h_flip_prob,
                           v_flip_prob=train_cfg.augment.v_flip_prob,
                           brightness=train_cfg.augment.brightness,
                           contrast=train_cfg.augment.contrast,
                           saturation=train_cfg.augment.saturation,
                           rng_seed=seed)
    model = build_model(cfg, init_seed=seed)
    opt = torch.optim.SGD(model.parameters(), lr=train_cfg.lr, momentum=train_cfg.momentum)
    loss_fn = nn.CrossEntropyLoss()
    all_clips = [c for v in train_videos
                 for c in v.clips(cfg.temporal.t, stride=train_cfg.clip_stride)]

    record = RunRecord(seed=seed, train_loss=[], train_acc=[], val_acc=[],
                       best_val_acc=-1.0, best_epoch=-1,
                       checkpoint=str(out_dir / f"run_seed{seed}_best.ckpt"),
                       wall_time_s=0.0)
    shuffle_rng = np.random.default_rng(seed + 1)
    augment_rng = np.random.default_rng(seed + 2)

    for epoch in range(train_cfg.epochs):
        model.train()
        if train_cfg.lr_step_epochs:
            scale = train_cfg.lr_step_gamma ** (epoch // train_cfg.lr_step_epochs)
            for group in opt.param_groups:
                group["lr"] = train_cfg.lr * scale
        order = shuffle_rng.permutation(len(all_clips))
        epoch_loss = 0.0
        correct = 0
        for i in range(0, len(order), train_cfg.batch_size):
            batch = [all_clips[j] for j in order[i:i + train_cfg.batch_size]]
            x = clip_batch_tensor(batch, cfg, policy=policy, rng=augment_rng)
            y = torch.tensor([c.label for c in batch])
            opt.zero_grad()
            try:
                logits = model(x)
                loss = loss_fn(logits, y)
            except NumericError as exc:
                raise NumericError(
                    f"training diverged at epoch {epoch}, "
                    f"batch {i // train_cfg.batch_size} (seed {seed}): {exc}") from exc
            if not torch.isfinite(loss):
                raise NumericError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch {i // train_cfg.batch_size} (seed {seed})")
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(batch)
            correct += int((logits.argmax(dim=1) == y).sum())
        record.train_loss.append(epoch_loss / len(all_clips))
        record.train_acc.append(correct / len(all_clips))

        val_acc = _clip_accuracy(model, val_videos, cfg, train_cfg.batch_size) \
            if val_videos else record.train_acc[-1]
        record.val_acc.append(val_acc)
        if val_acc > record.best_val_acc:
            record.best_val_acc = val_acc
            record.best_epoch = epoch
            save_checkpoint(model, record.checkpoint,
                            phases=list(manifest.phase_set.names),
                            extra={"seed": seed, "epoch": epoch, "val_acc": val_acc})
        log.info("seed %d epoch %d: loss=%.4f train_acc=%.3f val_acc=%.3f",
                 seed, epoch, record.train_loss[-1], record.train_acc[-1], val_acc)
        if (train_cfg.early_stop_train_acc is not None
                and record.train_acc[-1] >= train_cfg.early_stop_train_acc):
            log.info("seed %d: early stop at epoch %d", seed, epoch)
            break

    record.wall_time_s = time.perf_counter() - start
    return record


def train(cfg: ModelConfig, manifest: DatasetManifest, train_cfg: TrainConfig,
          out_dir: str | Path) -> list[RunRecord]:
    """All seeded runs plus a mean±std summary written to the run directory."""
    out_dir = Path(out_dir)
    records = [train_single_run(cfg, manifest, train_cfg, train_cfg.seeds[i], out_dir)
               for i in range(train_cfg.num_runs)]
    best = [r.best_val_acc for r in records]
    summary = {
        "runs": [r.to_dict() for r in records],
        "val_acc_mean": float(np.mean(best)),
        "val_acc_std": float(np.std(best)),
    }
    (out_dir / "train_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return records
