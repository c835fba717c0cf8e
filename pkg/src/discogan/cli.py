"""Command-line entry point: ``discogan <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen, metrics, pipeline, synth, trainer
from .config import RunConfig
from .dsp import AudioClip, read_wav, write_wav

log = logging.getLogger("discogan")

FAILURE_THRESHOLD = 0.10
ABLATION_GROUPS = ("delta_snr", "delta_si_sdr", "delta_fw_seg_snr")


def _run_config(args) -> RunConfig:
    base = RunConfig.toy() if args.toy else RunConfig.full()
    cfg = RunConfig.load(args.config, base) if args.config else base
    if args.seed is not None:
        cfg.train.seed = args.seed
    if getattr(args, "iterations", None) is not None:
        cfg.train.iterations = cfg.train.stage1_iterations = args.iterations
    if getattr(args, "conditioning", None):
        cfg.train.conditioning = args.conditioning
    return cfg.sync()


def _checkpoints(args) -> dict:
    return {"disc": args.disc_ckpt, "gan": args.gan_ckpt, "gan_nocond": args.nocogan_ckpt}


def cmd_synth(args) -> int:
    dirs = synth.write_sources(args.out_dir, args.clean, args.noise, args.rir, args.duration, args.seed)
    for name, path in dirs.items():
        print(f"{name}: {path}")
    return 0


def cmd_mix(args) -> int:
    recipe = datagen.Recipe(
        count=args.count,
        duration=args.duration,
        snr_range=(args.snr_min, args.snr_max),
        reverb_fraction=args.reverb_fraction,
        seed=args.seed if args.seed is not None else 0,
        split=args.split,
    )
    manifest = datagen.build_manifest(args.clean_dir, args.noise_dir, args.rir_dir, recipe)
    datagen.render_manifest(manifest, args.clean_dir, args.noise_dir, args.rir_dir, args.out_dir, args.anechoic_target)
    print(f"wrote {len(manifest)} mixtures to {args.out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    pairs = datagen.load_pairs(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / f"stage{args.stage}.ini")
    if args.stage == 1:
        path = trainer.train_stage1(pairs, cfg, out, resume=args.resume)
    else:
        if not args.disc_ckpt or not Path(args.disc_ckpt).exists():
            print("error: stage 2 needs an existing stage-1 checkpoint (--disc-ckpt)", file=sys.stderr)
            return 2
        path = trainer.train_stage2(pairs, cfg, args.disc_ckpt, out, resume=args.resume)
    print(f"checkpoint: {path}")
    return 0


def cmd_enhance(args) -> int:
    enhance = pipeline.build_enhancer(pipeline.parse_chain(args.chain), _checkpoints(args))
    src = Path(args.input)
    files = sorted(src.rglob("*.wav")) if src.is_dir() else [src]
    out = Path(args.out)
    if src.is_dir():
        out.mkdir(parents=True, exist_ok=True)
    for f in files:
        clip = read_wav(f)
        y = enhance(clip.samples)
        peak = np.max(np.abs(y))
        if peak > 1.0:
            log.warning("%s: enhanced peak %.3f, rescaling to avoid clipping", f.name, peak)
            y = y / peak * 0.99
        target = out / f.relative_to(src) if src.is_dir() else out
        target.parent.mkdir(parents=True, exist_ok=True)
        write_wav(target, AudioClip(y, clip.sample_rate))
    print(f"enhanced {len(files)} file(s) with chain {args.chain}")
    return 0


def run_eval(manifest, chain, checkpoints, report_path) -> metrics.MetricReport:
    enhance = pipeline.build_enhancer(chain, checkpoints)
    return metrics.evaluate_dataset(manifest, enhance, report_path)


def _failed(report: metrics.MetricReport) -> bool:
    return bool(report.rows) and report.failures / len(report.rows) > FAILURE_THRESHOLD


def cmd_eval(args) -> int:
    report = run_eval(args.manifest, pipeline.parse_chain(args.chain), _checkpoints(args), args.report)
    print(report.table())
    if report.failures:
        print(f"{report.failures} of {len(report.rows)} clips failed", file=sys.stderr)
    return 1 if _failed(report) else 0


def ablation_table(results: dict[str, metrics.MetricReport]) -> dict:
    table = {}
    for name in pipeline.ABLATIONS:
        if name not in results:
            continue
        buckets = results[name].buckets
        table[name] = {
            group: {label: buckets[label][group] if label in buckets else None for label in datagen.BUCKET_LABELS}
            for group in ABLATION_GROUPS
        }
    return table


def format_ablation(table: dict) -> str:
    labels = datagen.BUCKET_LABELS
    lines = []
    for group in ABLATION_GROUPS:
        lines.append(f"{group}")
        lines.append(f"  {'method':<18}" + "".join(f"{lb:>12}" for lb in labels))
        for name, row in table.items():
            cells = "".join(f"{row[group][lb]:>12.2f}" if row[group][lb] is not None else f"{'-':>12}" for lb in labels)
            lines.append(f"  {name:<18}{cells}")
    return "\n".join(lines)


def cmd_ablate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoints = _checkpoints(args)
    results, missing, failed = {}, [], False
    for name, chain in pipeline.ABLATIONS.items():
        slug = "_".join(chain)
        try:
            report = run_eval(args.manifest, chain, checkpoints, out / f"report_{slug}.json")
        except (FileNotFoundError, ValueError) as exc:
            missing.append(f"{name}: {exc}")
            continue
        failed |= _failed(report)
        results[name] = report
    table = ablation_table(results)
    (out / "ablation.json").write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
    print(format_ablation(table))
    for m in missing:
        print(f"missing configuration {m}", file=sys.stderr)
    return 1 if missing or failed else 0


def cmd_config(args) -> int:
    cfg = RunConfig.toy() if args.toy else RunConfig.full()
    cfg.save(args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discogan", description="Latent-conditioned GAN speech enhancement")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--toy", action="store_true", help="tiny model preset for CPU-scale runs")
        p.add_argument("--seed", type=int)
        p.add_argument("--device", default="cpu", choices=["cpu"])

    def ckpts(p):
        p.add_argument("--disc-ckpt")
        p.add_argument("--gan-ckpt", help="DisCoGAN checkpoint")
        p.add_argument("--nocogan-ckpt", help="NoCoGAN checkpoint")

    p = sub.add_parser("synth", help="write synthetic clean/noise/RIR source folders")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--clean", type=int, default=8)
    p.add_argument("--noise", type=int, default=4)
    p.add_argument("--rir", type=int, default=0)
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mix", help="render noisy/clean pairs and a manifest")
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--noise-dir", required=True)
    p.add_argument("--rir-dir")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--snr-min", type=float, default=-25.0)
    p.add_argument("--snr-max", type=float, default=0.0)
    p.add_argument("--reverb-fraction", type=float, default=0.5)
    p.add_argument("--split", choices=["train", "eval"], default="train")
    p.add_argument("--anechoic-target", action="store_true", help="use dry speech as the training target")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train", help="run stage 1 or stage 2 training")
    common(p)
    p.add_argument("--stage", type=int, choices=[1, 2], required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--disc-ckpt", help="stage-1 checkpoint (required for stage 2)")
    p.add_argument("--resume")
    p.add_argument("--iterations", type=int)
    p.add_argument("--conditioning", choices=["discogan", "nocogan"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a WAV file or folder")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--chain", default="gan")
    ckpts(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="score a chain on an eval manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--chain", default="gan")
    p.add_argument("--report", required=True)
    ckpts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="evaluate the five conditioning/chain configurations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    ckpts(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("config", help="write a configuration template")
    p.add_argument("--out", required=True)
    p.add_argument("--toy", action="store_true")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
