"""Command-line interface: train / infer / eval / bench-entropy / stats / ablate.

Exit codes: 0 success, 2 I/O problem, 3 configuration problem, 4 numeric
failure.  Every run prints its resolved configuration and the seed in use;
the environment variable EARFA_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import ConfigError, NumericError, ValidationError, WeightLoadError


def _model_config(args):
    from .model import ModelConfig, load_config
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        if getattr(args, "scale", None) and args.scale != cfg.scale:
            raise ConfigError(f"--scale {args.scale} contradicts config scale {cfg.scale}")
        return cfg
    presets = {"full": ModelConfig.full, "light": ModelConfig.light,
               "tiny": ModelConfig.tiny}
    variant = getattr(args, "variant", "full")
    if variant not in presets:
        raise ConfigError(f"unknown variant '{variant}'")
    scale = getattr(args, "scale", None)
    return presets[variant](scale=scale) if scale else presets[variant]()


def _print_config(cfg, seed=None):
    print("resolved configuration:")
    for line in cfg.to_text().strip().splitlines():
        print(f"  {line}")
    if seed is not None:
        print(f"seed: {seed}")


def _cmd_train(args) -> int:
    from .data import scan_dataset
    from .training import TrainConfig, train
    cfg = _model_config(args)
    tcfg = TrainConfig(batch=args.batch, iters=args.iters, lr0=args.lr0,
                       seed=args.seed, patch=args.patch,
                       milestones=tuple(args.milestones))
    tcfg.validate()
    _print_config(cfg, args.seed)
    val_pairs = scan_dataset(args.val_dataset, cfg.scale) if args.val_dataset else None
    result = train(cfg, tcfg, args.dataset, args.out, val_pairs=val_pairs,
                   resume=args.resume)
    print(f"trained {result['iterations']} iterations; "
          f"final loss {result['losses'][-1]:.6f}")
    print(f"weights: {result['weights']}")
    return 0


def _cmd_infer(args) -> int:
    from .data import load_png, save_png
    from .model import EARFA, super_resolve
    from .weights import load_weights
    cfg = _model_config(args)
    _print_config(cfg)
    model = EARFA(cfg)
    model.load_state(load_weights(args.weights))
    lr = load_png(args.input)
    sr = super_resolve(model, lr, ensemble=args.self_ensemble)
    src = Path(args.input)
    out_path = args.output or src.with_name(f"{src.stem}_x{cfg.scale}.png")
    save_png(sr, out_path)
    print(f"wrote {out_path}")
    return 0


def _cmd_eval(args) -> int:
    from .data import bicubic_resize, scan_dataset
    from .metrics import y_channel_scores
    from .model import EARFA, super_resolve
    from .weights import load_weights
    import numpy as np
    cfg = _model_config(args)
    _print_config(cfg)
    model = EARFA(cfg)
    model.load_state(load_weights(args.weights))
    pairs = scan_dataset(args.dataset, cfg.scale)
    if not pairs:
        raise FileNotFoundError(f"no HR PNG images under {args.dataset}")
    shave = cfg.scale if args.shave is None else args.shave
    dataset_name = Path(args.dataset).name
    rows = []
    for pair in pairs:
        sr = super_resolve(model, pair.lr, ensemble=args.self_ensemble)
        p, s = y_channel_scores(sr, pair.hr, shave)
        bic = np.clip(bicubic_resize(pair.lr, float(cfg.scale)), 0.0, 1.0)
        bp, bs = y_channel_scores(bic, pair.hr, shave)
        rows.append({"dataset": dataset_name, "image": pair.name,
                     "psnr": f"{p:.4f}", "ssim": f"{s:.6f}",
                     "bicubic_psnr": f"{bp:.4f}", "bicubic_ssim": f"{bs:.6f}"})
        print(f"  {pair.name}: psnr {p:.2f} dB, ssim {s:.4f} "
              f"(bicubic {bp:.2f} / {bs:.4f})")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.out}")
    mean_p = sum(float(r["psnr"]) for r in rows) / len(rows)
    mean_s = sum(float(r["ssim"]) for r in rows) / len(rows)
    print(f"mean over {len(rows)} images: psnr {mean_p:.4f} dB, ssim {mean_s:.6f}")
    return 0


def _cmd_stats(args) -> int:
    from .model import count_multiadds, count_params, slka_receptive_field
    cfg = _model_config(args)
    _print_config(cfg)
    params = count_params(cfg)
    madds = count_multiadds(cfg, out_h=args.out_h, out_w=args.out_w)
    print(f"params               : {params} ({params / 1e3:.0f}K)")
    print(f"multi-adds @ {args.out_w}x{args.out_h}: {madds} ({madds / 1e9:.2f}G)")
    print(f"slka receptive field : {slka_receptive_field(cfg)} px per axis")
    return 0


def _cmd_bench_entropy(args) -> int:
    from .entropy import bench_entropy, format_bench_report
    print("resolved configuration:")
    for key in ("batch", "c", "h", "w", "reps"):
        print(f"  {key}={getattr(args, key)}")
    print(f"seed: {args.seed}")
    report = bench_entropy(args.batch, args.c, args.h, args.w, reps=args.reps,
                           seed=args.seed)
    print(format_bench_report(report))
    print(json.dumps(report))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(report, f)
            f.write("\n")
    return 0


def _cmd_ablate(args) -> int:
    from .data import scan_dataset
    from .model import ModelConfig
    from .training import TrainConfig, ablate
    base = ModelConfig.tiny(scale=args.scale)
    tcfg = TrainConfig(batch=args.batch, iters=args.iters, lr0=args.lr0,
                       seed=args.seed, patch=args.patch,
                       milestones=(args.iters // 2,) if args.iters > 1 else (),
                       eval_every=max(args.iters, 1),
                       checkpoint_every=max(args.iters, 1))
    _print_config(base, args.seed)
    val_pairs = scan_dataset(args.val_dataset, base.scale) if args.val_dataset else None
    rows = ablate(base, tcfg, args.dataset, args.out, val_pairs=val_pairs)
    print(f"{'variant':10s} {'slka':>4s} {'ea':>3s} {'lka':>4s} {'se':>3s} "
          f"{'psnr':>8s} {'ssim':>8s}")
    for row in rows:
        print(f"{row['variant']:10s} {row['slka']:>4d} {row['ea']:>3d} "
              f"{row['lka']:>4d} {row['se']:>3d} {row['psnr']:>8.3f} {row['ssim']:>8.4f}")
    print(f"wrote {Path(args.out) / 'ablation.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earfa",
        description="Entropy-attention super-resolution toolkit.",
        epilog="Environment: EARFA_THREADS caps internal parallelism; "
               "EARFA_DEBUG=1 enables finiteness checks on every operator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_flags(p, default_variant="full"):
        p.add_argument("--config", help="model config file (flat key=value text)")
        p.add_argument("--variant", default=default_variant,
                       choices=["full", "light", "tiny"],
                       help="preset when no --config is given")
        p.add_argument("--scale", type=int, choices=[2, 3, 4], default=None,
                       help="upscaling factor (must match --config if both given)")

    p = sub.add_parser("train", help="train a model on a directory of HR PNGs")
    add_model_flags(p)
    p.add_argument("--dataset", required=True, help="directory of HR PNG images")
    p.add_argument("--val-dataset", help="directory of validation HR PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--iters", type=int, default=500_000)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--patch", type=int, default=64, help="LR patch size")
    p.add_argument("--lr0", type=float, default=5e-4)
    p.add_argument("--milestones", type=int, nargs="+",
                   default=[250_000, 400_000, 450_000, 475_000])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", help="checkpoint stem to continue from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="upscale one PNG image")
    add_model_flags(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True, help="input PNG")
    p.add_argument("--output", help="output path (default <input>_x<scale>.png)")
    p.add_argument("--self-ensemble", action="store_true",
                   help="average over the 8 dihedral transforms")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="PSNR/SSIM over a directory of HR PNGs")
    add_model_flags(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="CSV report path")
    p.add_argument("--shave", type=int, default=None,
                   help="border pixels to exclude (default: scale)")
    p.add_argument("--self-ensemble", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="parameter and multiply-add counts")
    add_model_flags(p)
    p.add_argument("--out-h", type=int, default=720, help="output height for multi-adds")
    p.add_argument("--out-w", type=int, default=1280, help="output width for multi-adds")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("bench-entropy",
                       help="time histogram vs Gaussian differential entropy")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--c", type=int, default=64)
    p.add_argument("--h", type=int, default=180)
    p.add_argument("--w", type=int, default=320)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the JSON report here")
    p.set_defaults(func=_cmd_bench_entropy)

    p = sub.add_parser("ablate", help="train all six attention variants at toy scale")
    p.add_argument("--dataset", required=True)
    p.add_argument("--val-dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", type=int, choices=[2, 3, 4], default=2)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--lr0", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError, WeightLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
