"""Command-line entry point.

Subcommands: synth-data, prepare, train, eval, profile, export, parity,
speed-compare, stream, ribbon. Global flags: --seed, --out, --config,
--force. Machine-readable outputs land in the run directory
(configs/ checkpoints/ traces/ reports/ figures/); logs go to stderr.

Exit codes: 0 success, 1 failed check (parity), 2 usage, 3 config or data
error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

import numpy as np

from .errors import (CheckpointLoadError, ConfigError, ExportError,
                     IngestionError, NumericError, ParityError, PhaseRecError)

log = logging.getLogger("phaserec")

RUN_SUBDIRS = ("configs", "checkpoints", "traces", "reports", "figures")


def _ensure_run_dir(out: str | Path) -> Path:
    out = Path(out)
    for sub in RUN_SUBDIRS:
        (out / sub).mkdir(parents=True, exist_ok=True)
    return out


def _guard_overwrite(path: Path, force: bool) -> Path:
    if path.exists() and not force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")
    return path


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = random.SystemRandom().randrange(2 ** 31)
    log.info("no --seed given; selected seed %d", seed)
    return seed


def _load_config_file(args) -> dict:
    if not args.config:
        return {}
    doc = json.loads(Path(args.config).read_text())
    log.info("config file %s loaded (CLI flags take precedence)", args.config)
    return doc


def _model_config(args, file_cfg: dict, num_classes: int):
    from .model.config import ModelConfig, default_config, tiny_config

    if file_cfg.get("model"):
        cfg = ModelConfig.from_dict(file_cfg["model"])
        log.info("model config from file: %d classes, t=%d",
                 cfg.temporal.num_classes, cfg.temporal.t)
        return cfg
    t = getattr(args, "t", None) or 10
    if getattr(args, "tiny", False):
        return tiny_config(num_classes=num_classes, t=t)
    return default_config(num_classes=num_classes, t=t)


# --------------------------------------------------------------------------


def cmd_synth_data(args) -> int:
    from .data.manifest import PhaseSet, make_splits
    from .data.synth import PhaseDuration, synthesize_dataset

    seed = _resolve_seed(args)
    out = Path(args.out)
    _guard_overwrite(out / "manifest.json", args.force)
    names = args.phase_names.split(",") if args.phase_names else \
        [f"phase_{i}" for i in range(args.phases)]
    durations = None
    if args.durations:
        durations = []
        for token in args.durations.split(","):
            mean, _, sd = token.partition(":")
            durations.append(PhaseDuration(float(mean), float(sd) if sd else 0.0))
    manifest = synthesize_dataset(
        n_videos=args.videos, phase_set=PhaseSet(tuple(names)),
        duration_model=durations, visual_theme=args.theme, seed=seed,
        out_dir=out, fps=args.fps,
        frame_size=(args.frame_width, args.frame_height))
    if args.splits:
        counts = tuple(int(x) for x in args.splits.split(","))
        manifest = make_splits(manifest, counts, seed=seed)
        manifest.save(out / "manifest.json")
    log.info("wrote %d synthetic videos under %s", args.videos, out)
    return 0


def cmd_prepare(args) -> int:
    from .data.frames import extract_frames, write_frame_dir
    from .data.manifest import DatasetManifest, ManifestEntry, PhaseSet, make_splits

    out = _ensure_run_dir(args.out)
    _guard_overwrite(out / "manifest.json", args.force)
    names = args.phase_names.split(",")
    entries = []
    for video in args.videos:
        video_path = Path(video)
        ann = Path(args.annotations_dir) / f"{video_path.stem}.tsv"
        if not ann.exists():
            raise IngestionError(f"no annotation file {ann} for {video}")
        frames = extract_frames(video_path, args.sampling_fps, native_fps=args.fps)
        frame_dir = out / "frames" / video_path.stem
        write_frame_dir([f.pixels for f in frames], frame_dir)
        entries.append(ManifestEntry(video=str(frame_dir), fps=args.sampling_fps,
                                     annotations=str(ann), video_id=video_path.stem))
    manifest = DatasetManifest(entries=tuple(entries),
                               phase_set=PhaseSet(tuple(names)),
                               sampling_fps=args.sampling_fps)
    if args.splits:
        counts = tuple(int(x) for x in args.splits.split(","))
        manifest = make_splits(manifest, counts, seed=_resolve_seed(args))
    manifest.save(out / "manifest.json")
    log.info("prepared %d videos at %.3g fps", len(entries), args.sampling_fps)
    return 0


def cmd_train(args) -> int:
    from .data.augment import AugmentPolicy
    from .data.manifest import DatasetManifest
    from .training import TrainConfig, train

    seed = _resolve_seed(args)
    file_cfg = _load_config_file(args)
    manifest = DatasetManifest.load(args.manifest)
    cfg = _model_config(args, file_cfg, num_classes=len(manifest.phase_set))
    out = _ensure_run_dir(args.out)
    _guard_overwrite(out / "train_summary.json", args.force)

    train_kwargs = dict(file_cfg.get("train", {}))
    if "augment" in train_kwargs:
        train_kwargs["augment"] = AugmentPolicy(**train_kwargs["augment"])
    for key, flag in (("epochs", args.epochs), ("batch_size", args.batch_size),
                      ("lr", args.lr), ("num_runs", args.runs),
                      ("clip_stride", args.clip_stride)):
        if flag is not None:
            train_kwargs[key] = flag
    train_kwargs.setdefault("augment",
                            AugmentPolicy(crop_size=cfg.backbone.input_size))
    n_runs = train_kwargs.get("num_runs", 3)
    train_kwargs["seeds"] = tuple(seed + i for i in range(n_runs))
    train_cfg = TrainConfig(**train_kwargs)

    (out / "configs" / "model.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    records = train(cfg, manifest, train_cfg, out / "checkpoints")
    summary_src = out / "checkpoints" / "train_summary.json"
    (out / "train_summary.json").write_text(summary_src.read_text())
    best = max(records, key=lambda r: r.best_val_acc)
    log.info("best run: seed %d val_acc %.3f (%s)", best.seed, best.best_val_acc,
             best.checkpoint)
    return 0


def cmd_eval(args) -> int:
    from .data.manifest import DatasetManifest
    from .evaluation import evaluate_checkpoint, write_trace

    manifest = DatasetManifest.load(args.manifest)
    out = _ensure_run_dir(args.out)
    report_path = _guard_overwrite(out / "reports" / f"eval_{args.split}.json", args.force)
    report, traces = evaluate_checkpoint(args.checkpoint, manifest, args.split,
                                         pooled=args.pooled)
    for trace in traces:
        write_trace(trace, out / "traces" / f"{trace.video_id}.jsonl")
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    log.info("split %s: AC %.4f  PR %.4f  RE %.4f", args.split,
             report.accuracy_mean, report.precision_mean, report.recall_mean)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_profile(args) -> int:
    import torch

    from .model.checkpoint import load_checkpoint
    from .model.network import build_model, count_params
    from .profiling import ProfileReport, count_macs, measure_latency, model_size

    file_cfg = _load_config_file(args)
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint)
        cfg = model.cfg
        size = model_size(args.checkpoint)
    else:
        cfg = _model_config(args, file_cfg, num_classes=args.classes)
        model = build_model(cfg, init_seed=_resolve_seed(args)).eval()
        size = None
    t = args.t or cfg.temporal.t
    latency = None
    if not args.skip_latency:
        rng = np.random.default_rng(0)
        clip = rng.uniform(-1, 1, (1, t, cfg.backbone.input_size,
                                   cfg.backbone.input_size, 3)).astype(np.float32)
        prior = torch.get_num_threads()
        torch.set_num_threads(1)
        try:
            def runnable(x):
                with torch.no_grad():
                    return model(torch.from_numpy(x))
            latency = measure_latency(runnable, [clip], runs=args.runs)
        finally:
            torch.set_num_threads(prior)
    report = ProfileReport(params=count_params(model), size_bytes=size,
                           macs=count_macs(cfg, t), t=t, latency=latency)
    if args.out:
        _guard_overwrite(Path(args.out), args.force)
        report.save(args.out)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_export(args) -> int:
    from .export import export_portable

    out = _guard_overwrite(Path(args.out), args.force)
    bundle = export_portable(args.checkpoint, out)
    log.info("exported %s (opset %d)", bundle.path, bundle.opset)
    return 0


def cmd_parity(args) -> int:
    from .export import parity_check

    report = parity_check(args.checkpoint, args.bundle, n_samples=args.samples,
                          seed=_resolve_seed(args), tolerance=args.tolerance)
    print(json.dumps(report.to_dict(), indent=2))
    if not report.ok:
        log.error("parity FAILED: max|Δlogit| %.3g (tolerance %.3g), agreement %.3f",
                  report.max_abs_diff, report.tolerance, report.argmax_agreement)
        return 1
    log.info("parity ok: max|Δlogit| %.3g over %d samples",
             report.max_abs_diff, report.n_samples)
    return 0


def cmd_speed_compare(args) -> int:
    from .export.parity import compare_latency_eager_vs_exported

    report = compare_latency_eager_vs_exported(args.checkpoint, args.bundle,
                                               runs=args.runs, backend=args.backend)
    print(json.dumps(report.to_dict(), indent=2))
    log.info("eager %.1f ms vs exported %.1f ms (ratio %.2f)",
             report.eager.mean_ms, report.exported.mean_ms, report.ratio)
    return 0


def cmd_stream(args) -> int:
    import torch

    from .data.frames import extract_frames, read_annotations
    from .data.manifest import PhaseSet
    from .evaluation.trace import write_trace
    from .geometry import normalize, preprocess
    from .stream import StreamConfig, run_stream, summarize_stream

    if args.bundle:
        from .export import GraphExecutor, load_bundle
        from .export.bundle import INPUT_NAME, OUTPUT_NAME
        proto, bundle = load_bundle(args.bundle)
        norm = bundle.metadata["normalization"]
        t = bundle.metadata["t"]
        resize, crop = norm["resize_size"], norm["crop_size"]
        mean, std = tuple(norm["mean"]), tuple(norm["std"])
        executor = GraphExecutor(proto, backend=args.backend)
        phases = bundle.phases

        def runnable(window):
            return executor.run({INPUT_NAME: window[None]})[OUTPUT_NAME][0]
    elif args.checkpoint:
        from .model.checkpoint import load_checkpoint
        model, header = load_checkpoint(args.checkpoint)
        cfg = model.cfg
        t = cfg.temporal.t
        resize, crop = cfg.backbone.resize_size, cfg.backbone.input_size
        mean, std = cfg.norm_mean, cfg.norm_std
        phases = header.get("phases", [])

        def runnable(window):
            with torch.no_grad():
                return model(torch.from_numpy(window[None])).numpy()[0]
    else:
        raise ConfigError("stream needs --bundle or --checkpoint")

    raw = extract_frames(args.source, sampling_fps=args.fps, native_fps=args.fps)
    frames = [normalize(preprocess(f.pixels, resize, crop), mean, std) for f in raw]
    labels = None
    if args.annotations:
        if not phases:
            raise ConfigError("annotations given but the model carries no phase names")
        labels = read_annotations(args.annotations, PhaseSet(tuple(phases)))
    cfg_stream = StreamConfig(fps=args.fps, t=t, drop_policy=args.policy,
                              max_duration_s=args.max_duration, realtime=args.realtime)
    result = run_stream(runnable, frames, cfg_stream, labels=labels,
                        video_id=Path(args.source).stem)
    summary = summarize_stream(result)
    if args.out:
        _guard_overwrite(Path(args.out), args.force)
        write_trace(result.trace, args.out)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_ribbon(args) -> int:
    from .evaluation.ribbon import render_ribbon
    from .evaluation.trace import read_trace

    if args.manifest:
        from .data.manifest import DatasetManifest
        phases = list(DatasetManifest.load(args.manifest).phase_set.names)
    else:
        phases = args.phases.split(",")
    trace = read_trace(args.trace)
    out = _guard_overwrite(Path(args.out), args.force)
    render_ribbon(trace, out, phases)
    log.info("ribbon written to %s", out)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaserec",
        description="Online surgical-phase recognition pipeline: data synthesis, "
                    "training, evaluation, profiling, portable export, streaming.")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--force", action="store_true",
                       help="allow overwriting existing outputs")

    p = sub.add_parser("synth-data", help="generate a labeled synthetic dataset")
    common(p)
    p.add_argument("--videos", type=int, default=5)
    p.add_argument("--phases", type=int, default=5)
    p.add_argument("--phase-names", default=None)
    p.add_argument("--fps", type=float, default=1.0)
    p.add_argument("--theme", default="bands")
    p.add_argument("--frame-width", type=int, default=320)
    p.add_argument("--frame-height", type=int, default=240)
    p.add_argument("--durations", default=None,
                   help="per-phase mean[:sd] seconds, comma separated")
    p.add_argument("--splits", default=None, help="train,test,val video counts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("prepare", help="extract frames from videos into a manifest")
    common(p)
    p.add_argument("--videos", nargs="+", required=True)
    p.add_argument("--annotations-dir", required=True)
    p.add_argument("--phase-names", required=True)
    p.add_argument("--fps", type=float, default=None, help="native fps override")
    p.add_argument("--sampling-fps", type=float, default=1.0)
    p.add_argument("--splits", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train over the manifest's train/val splits")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tiny", action="store_true", help="scaled-down architecture")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--clip-stride", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="online evaluation of a checkpoint on a split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--pooled", action="store_true",
                   help="frame-pooled PR/RE instead of per-video macro")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("profile", help="params / size / MACs / latency report")
    common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--tiny", action="store_true")
    p.add_argument("--classes", type=int, default=7)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--skip-latency", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("export", help="convert a checkpoint to a portable bundle")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("parity", help="native vs exported numerical parity")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_parity)

    p = sub.add_parser("speed-compare", help="eager vs exported latency")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--backend", default="torch", choices=("torch", "numpy"))
    p.set_defaults(func=cmd_speed_compare)

    p = sub.add_parser("stream", help="simulated online streaming over a source")
    common(p)
    p.add_argument("--bundle", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--source", required=True, help="frame directory or video file")
    p.add_argument("--annotations", default=None)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--policy", default="latest-frame",
                   choices=("latest-frame", "queue-all"))
    p.add_argument("--max-duration", type=float, default=None)
    p.add_argument("--realtime", action="store_true")
    p.add_argument("--backend", default="torch", choices=("torch", "numpy"))
    p.add_argument("--out", default=None, help="trace JSONL path")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("ribbon", help="render a GT-vs-Pred ribbon from a trace")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--phases", default=None, help="comma-separated phase names")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_ribbon)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)
    if args.command == "ribbon" and not (args.phases or args.manifest):
        parser.error("ribbon needs --phases or --manifest")
    try:
        return args.func(args)
    except (ConfigError, IngestionError, CheckpointLoadError, ExportError,
            ParityError, OSError) as exc:
        log.error("%s", exc)
        return 3
    except NumericError as exc:
        log.error("%s", exc)
        return 4
    except PhaseRecError as exc:
        log.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
