"""Command line entry point: ``ncvqvae <verb> --config FILE [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, make_config


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else make_config(profile=getattr(args, "profile", None))
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = str(args.out)
    return cfg


def _ckpts(cfg: ExperimentConfig, args) -> tuple[Path, Path]:
    out = Path(cfg.out_dir)
    s1 = Path(args.stage1_ckpt) if args.stage1_ckpt else out / "stage1" / "ckpt_last.pt"
    s2 = Path(args.stage2_ckpt) if args.stage2_ckpt else out / "stage2" / "ckpt.pt"
    return s1, s2


def cmd_stage1(args) -> int:
    from .pipeline import run_stage1

    cfg = _config(args)
    path = run_stage1(cfg, resume=args.resume)
    print(path)
    return 0


def cmd_stage2(args) -> int:
    from .pipeline import run_stage2

    cfg = _config(args)
    s1, _ = _ckpts(cfg, args)
    print(run_stage2(cfg, s1))
    return 0


def cmd_generate(args) -> int:
    from .pipeline import run_generate

    cfg = _config(args)
    s1, s2 = _ckpts(cfg, args)
    name = "samples.csv" if args.class_label is None else f"samples_class{args.class_label}.csv"
    out_path = Path(args.output or Path(cfg.out_dir) / "generated" / name)
    run_generate(s1, s2, args.n, out_path, seed=cfg.seed, class_label=args.class_label)
    print(out_path)
    return 0


def cmd_evaluate(args) -> int:
    from .pipeline import run_eval

    cfg = _config(args)
    s1, s2 = _ckpts(cfg, args)
    report = run_eval(cfg, s1, s2, figures=not args.no_figures)
    sys.stdout.write(report.to_text())
    return 0


def cmd_report(args) -> int:
    from .pipeline import summarize

    rows = summarize([Path(d) for d in args.runs])
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    header = f"{'dataset':<24}{'ssl':<14}{'aug':<15}{'seeds':>5}  {'KNN':>11}  {'SVM':>11}  {'FID':>13}  {'IS':>11}"
    print(header)
    for r in rows:
        cells = [f"{r[m]:.3f}±{r[m + '_std']:.3f}" for m in ("knn_accuracy", "svm_accuracy", "fid", "is_score")]
        print(f"{r['dataset']:<24}{r['ssl']:<14}{r['augmentation']:<15}{r['n_seeds']:>5}  " + "  ".join(f"{c:>11}" for c in cells))
    return 0


def cmd_synth(args) -> int:
    from .synthetic import write_surrogate

    print(write_surrogate(args.root, args.name, args.seed or 0))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncvqvae", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, ckpts=False):
        p.add_argument("--config", type=Path, help="YAML experiment config (defaults to the full profile)")
        p.add_argument("--profile", choices=["full", "desk"], help="preset used when no --config is given")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="run directory")
        if ckpts:
            p.add_argument("--stage1-ckpt", type=Path)
            p.add_argument("--stage2-ckpt", type=Path)

    p = sub.add_parser("stage1", help="train the tokenizer")
    common(p)
    p.add_argument("--resume", action="store_true", help="continue from <out>/stage1/ckpt_last.pt")
    p.set_defaults(func=cmd_stage1)

    p = sub.add_parser("stage2", help="train the masked prior")
    common(p, ckpts=True)
    p.set_defaults(func=cmd_stage2)

    p = sub.add_parser("generate", help="sample series to a CSV file")
    common(p, ckpts=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--class-label", type=int)
    p.add_argument("--output", type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="probe accuracy, FID, IS and figures")
    common(p, ckpts=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate eval/metrics.txt over run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a simulated dataset in UCR layout")
    p.add_argument("name", choices=["TwoPatterns", "SonyAIBORobotSurface2"])
    p.add_argument("--root", type=Path, default=Path("data"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # every aborted stage exits nonzero
        logging.getLogger("ncvqvae").error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
