"""Batch-style command line: synth / train / infer / eval / ensemble / plot."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .accdoa import decode_accdoa, dump_accdoa, encode_accdoa, load_accdoa
from .augment import SpecAugmentConfig
from .ensemble import (
    EnsembleWeights, combine, ensemble_mse, fit_weights, read_weights_csv, write_weights_csv,
)
from .features import StftConfig
from .infer import Predictor
from .metrics import MetricsAccumulator, metrics_csv_header, metrics_csv_row
from .net.checkpoint import (
    KIND_ACCDOA, KIND_TWO_STAGE, build_config_dict, load_model, save_model,
)
from .net.model import NetConfig, RD3NetLite, TwoStageNet
from .net.optim import TrainConfig
from .net.train import AugmentOptions, SceneBatchStream, train_single_stage, train_two_stage
from .plot import write_timeline
from .scene import SceneConfig, read_label_csv, read_wav, synth_scene, write_label_csv, write_wav

FORMAT_VERSION = 1

_CONFIG_DEFAULTS = {
    "scene.n_classes": 14,
    "scene.duration_s": 10.0,
    "scene.max_polyphony": 2,
    "scene.n_events": 3,
    "stft.win_len": 480,
    "stft.hop": 240,
    "stft.fft_size": 512,
    "stft.window": "hann",
    "net.stem_channels": 16,
    "net.growth": 8,
    "net.layers_per_block": 3,
    "net.n_blocks": 2,
    "net.freq_pool": 4,
    "net.gru_hidden": 64,
    "train.lr": 1e-3,
    "train.lr_decay": 0.9,
    "train.decay_interval": 20000,
    "train.weight_decay": 1e-6,
    "train.batch_size": 32,
    "train.input_frames": 1024,
    "data.pool_scenes": 64,
    "data.secondary_bank": 32,
}


def read_config(path=None) -> dict:
    """Flat `key = value` file merged over the built-in defaults."""
    merged = dict(_CONFIG_DEFAULTS)
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in merged:
                raise SystemExit(f"{path}:{lineno}: unknown key {key!r}")
            old = merged[key]
            merged[key] = value if isinstance(old, str) else type(old)(float(value)) \
                if isinstance(old, int) else float(value)
    return merged


def _configs_from(merged: dict, seed: int):
    scene_cfg = SceneConfig(
        n_classes=int(merged["scene.n_classes"]),
        duration_s=float(merged["scene.duration_s"]),
        max_polyphony=int(merged["scene.max_polyphony"]),
        n_events=int(merged["scene.n_events"]),
        rng_seed=seed,
    )
    stft_cfg = StftConfig(
        win_len=int(merged["stft.win_len"]),
        hop=int(merged["stft.hop"]),
        fft_size=int(merged["stft.fft_size"]),
        window=str(merged["stft.window"]),
    )
    net_cfg = NetConfig(
        n_classes=scene_cfg.n_classes,
        f_bins=stft_cfg.n_bins,
        stem_channels=int(merged["net.stem_channels"]),
        growth=int(merged["net.growth"]),
        layers_per_block=int(merged["net.layers_per_block"]),
        n_blocks=int(merged["net.n_blocks"]),
        freq_pool=int(merged["net.freq_pool"]),
        gru_hidden=int(merged["net.gru_hidden"]),
    )
    train_cfg = TrainConfig(
        lr=float(merged["train.lr"]),
        lr_decay=float(merged["train.lr_decay"]),
        decay_interval=int(merged["train.decay_interval"]),
        weight_decay=float(merged["train.weight_decay"]),
        batch_size=int(merged["train.batch_size"]),
        input_frames=int(merged["train.input_frames"]),
    )
    return scene_cfg, stft_cfg, net_cfg, train_cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    cfg = SceneConfig(
        n_classes=args.classes, duration_s=args.duration,
        max_polyphony=args.polyphony, n_events=args.events, rng_seed=args.seed,
    )
    manifest = {
        "config": {
            "scenes": args.scenes, "classes": args.classes, "duration": args.duration,
            "polyphony": args.polyphony, "events": args.events, "seed": args.seed,
            "format_version": FORMAT_VERSION,
        },
        "scenes": [],
    }
    rng = np.random.default_rng(args.seed)
    for k in range(args.scenes):
        clip, events = synth_scene(cfg, rng)
        wav = out / "audio" / f"scene{k:03d}.wav"
        lab = out / "labels" / f"scene{k:03d}.csv"
        write_wav(wav, clip)
        write_label_csv(lab, events)
        manifest["scenes"].append({"audio": wav.name, "labels": lab.name, "n_events": len(events.events)})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {args.scenes} scenes to {out}")
    return 0


def cmd_train(args) -> int:
    merged = read_config(args.config)
    scene_cfg, stft_cfg, net_cfg, train_cfg = _configs_from(merged, args.seed)
    if args.iters < 0:
        raise SystemExit("--iters must be >= 0")
    augment = AugmentOptions(
        emda=args.emda, rotate=args.rotate, specaug=args.specaug,
        spec_cfg=SpecAugmentConfig(),
    )
    stream = SceneBatchStream(
        scene_cfg, stft_cfg, train_cfg.batch_size, train_cfg.input_frames,
        seed=args.seed, augment=augment,
        pool_scenes=int(merged["data.pool_scenes"]),
        secondary_bank=int(merged["data.secondary_bank"]),
        workers=args.workers,
    )
    extra = {"train.seed": args.seed, "train.iters": args.iters, "train.mode": args.mode}
    if args.mode == "accdoa":
        model = RD3NetLite(net_cfg, seed=args.seed)
        log = train_single_stage(model, stream, train_cfg, args.iters)
        save_model(args.out, KIND_ACCDOA, model, net_cfg, stft_cfg, extra)
    else:
        model = TwoStageNet(net_cfg, seed=args.seed)
        sed_iters = args.iters_sed if args.iters_sed is not None else args.iters // 2
        doa_iters = args.iters - sed_iters
        if args.iters_sed is not None and args.iters_doa is not None:
            doa_iters = args.iters_doa
        log = train_two_stage(model, stream, train_cfg, sed_iters, doa_iters)
        save_model(args.out, KIND_TWO_STAGE, model, net_cfg, stft_cfg, extra)
    loss_path = args.loss_log or (str(args.out) + ".loss.csv")
    with open(loss_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "loss", "phase"])
        writer.writerows(log)
    print(f"saved checkpoint {args.out} ({len(log)} loss rows -> {loss_path})")
    return 0


def cmd_infer(args) -> int:
    kind, model, _net_cfg, stft_cfg, _cfg = load_model(args.ckpt)
    clip = read_wav(args.wav)
    predictor = Predictor(model, stft_cfg, seg_len=args.seg_len, shift=args.shift)
    seq = predictor.label_rate_sequence(clip, tta=args.tta)
    if args.dump_accdoa:
        dump_accdoa(args.dump_accdoa, seq)
    events = decode_accdoa(seq, threshold=args.threshold)
    write_label_csv(args.out, events)
    print(f"{kind} model: {len(events.events)} events -> {args.out}")
    return 0


def _read_pair(pred_path: Path, ref_path: Path, n_classes: int, threshold: float):
    ref = read_label_csv(ref_path)
    pred = read_label_csv(pred_path, n_frames=ref.n_frames)
    acc = MetricsAccumulator(n_classes=n_classes, threshold_deg=threshold)
    acc.update(pred, ref)
    return acc


def _eval_one(pred_spec: str, ref: Path, n_classes: int, threshold: float):
    pred = Path(pred_spec)
    acc = MetricsAccumulator(n_classes=n_classes, threshold_deg=threshold)
    if pred.is_dir() != ref.is_dir():
        raise SystemExit("--pred and --ref must both be files or both directories")
    if pred.is_dir():
        names = sorted(p.name for p in ref.glob("*.csv"))
        if not names:
            raise SystemExit(f"no reference CSVs in {ref}")
        for name in names:
            if not (pred / name).exists():
                raise SystemExit(f"missing prediction {pred / name}")
            one = _read_pair(pred / name, ref / name, n_classes, threshold)
            for field in ("tp", "fp", "fn", "s", "d", "i", "k_matched", "d_sum", "n_ref"):
                setattr(acc, field, getattr(acc, field) + getattr(one, field))
    else:
        acc = _read_pair(pred, ref, n_classes, threshold)
    return acc.finalize()


def cmd_eval(args) -> int:
    results = {}
    for spec in args.pred:
        name, _, path = spec.rpartition("=")
        name = name or Path(path).stem
        results[name] = _eval_one(path, Path(args.ref), args.classes, args.threshold)
    header = metrics_csv_header()
    widths = [12, 8, 8, 8, 8]
    print("  ".join(h.ljust(w) for h, w in zip(header[:5], widths)))
    for name, m in results.items():
        row = metrics_csv_row(name, m)
        print("  ".join(str(v).ljust(w) for v, w in zip(row[:5], widths)))
    if args.out:
        payload = {name: m.to_dict() for name, m in results.items()}
        if len(results) == 1:
            payload = next(iter(payload.values()))
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for name, m in results.items():
                writer.writerow(metrics_csv_row(name, m))
    return 0


def cmd_ensemble(args) -> int:
    outputs = [load_accdoa(p) for p in args.preds]
    if args.action == "fit":
        ref = read_label_csv(args.labels)
        targets = encode_accdoa(ref, args.classes, outputs[0].shape[0])
        weights = fit_weights(outputs, targets, lr=args.lr, iters=args.iters,
                              batch=args.batch, seed=args.seed)
        write_weights_csv(args.weights, weights)
        mse = ensemble_mse(outputs, weights, targets)
        print(f"fitted {weights.n_classes}x{weights.n_models} weights "
              f"(validation MSE {mse:.6f}) -> {args.weights}")
    else:
        weights = read_weights_csv(args.weights)
        seq = combine(outputs, weights)
        events = decode_accdoa(seq, threshold=args.threshold)
        write_label_csv(args.out, events)
        print(f"combined {len(outputs)} models -> {args.out}")
    return 0


def cmd_plot(args) -> int:
    events = read_label_csv(args.pred)
    n_classes = args.classes or (1 + max((ev.class_id for ev in events.events), default=0))
    csv_path = args.out_csv or str(Path(args.out).with_suffix(".csv"))
    write_timeline(args.out, csv_path, events, n_classes)
    print(f"wrote {args.out} and {csv_path}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seldkit",
        description="Sound event localization and detection toolkit",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"seldkit {__version__} (file format {FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a scene dataset")
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--classes", type=int, default=14)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--polyphony", type=int, default=2)
    p.add_argument("--events", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on synthetic scenes")
    p.add_argument("--mode", choices=["accdoa", "two-stage"], default="accdoa")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--iters-sed", type=int, default=None)
    p.add_argument("--iters-doa", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--emda", action="store_true")
    p.add_argument("--rotate", action="store_true")
    p.add_argument("--specaug", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--loss-log", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict events for a WAV file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tta", action="store_true", help="average over the 8 rotations")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seg-len", type=int, default=1024)
    p.add_argument("--shift", type=int, default=20)
    p.add_argument("--dump-accdoa", default=None, help="also dump the raw label-rate sequence")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--pred", action="append", required=True,
                   help="prediction CSV/dir, optionally NAME=PATH; repeatable")
    p.add_argument("--ref", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--threshold", type=float, default=20.0)
    p.add_argument("--out", help="write metrics JSON here")
    p.add_argument("--csv", help="write metrics CSV rows here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="fit or apply ensemble weights")
    p.add_argument("action", choices=["fit", "apply"])
    p.add_argument("--preds", nargs="+", required=True, help="model output dumps (.acc)")
    p.add_argument("--weights", required=True)
    p.add_argument("--labels", help="reference CSV (fit)")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--out", help="decoded CSV (apply)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--batch", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("plot", help="render an event CSV as an SVG timeline")
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--classes", type=int, default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "ensemble":
        if args.action == "fit" and (not args.labels or args.classes is None):
            raise SystemExit("ensemble fit requires --labels and --classes")
        if args.action == "apply" and not args.out:
            raise SystemExit("ensemble apply requires --out")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
