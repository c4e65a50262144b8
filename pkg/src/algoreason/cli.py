"""Command-line entry points: gen-data, pretrain, train, eval, baselines."""

import argparse
import sys

from .harness import ExperimentConfig, cmd_baselines, cmd_eval, cmd_gen_data, \
    cmd_pretrain, cmd_train, load_config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (fields of ExperimentConfig)")
    p.add_argument("--seed", type=int, help="experiment seed")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--algos", help="comma list of algorithms or presets (tsp_base, mtab, fmitb)")
    p.add_argument("--transfer", choices=["none", "pf", "pft", "2proc", "mtl"])
    p.add_argument("--pretrained", help="pretrained checkpoint path")


def _config_from(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.algos:
        overrides["algorithms"] = args.algos.split(",")
    if args.transfer:
        overrides["transfer"] = args.transfer
    if args.pretrained:
        overrides["pretrained"] = args.pretrained
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="algoreason",
        description="Pre-train on classical algorithms, transfer to TSP / vertex k-center",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("gen-data", "pretrain", "train", "baselines"):
        _add_common(sub.add_parser(name))
    p_eval = sub.add_parser("eval")
    _add_common(p_eval)
    p_eval.add_argument("--seeds", default=None, help="comma list of trained seeds")
    p_eval.add_argument("--beam-width", type=int, action="append", dest="beam_widths",
                        help="repeatable; overrides config beam widths")
    p_eval.add_argument("--include-oracle", action="store_true",
                        help="add a row scoring the stored optimal solutions")

    args = parser.parse_args(argv)
    try:
        cfg = _config_from(args)
        if args.command == "gen-data":
            for path in cmd_gen_data(cfg):
                print(path)
        elif args.command == "pretrain":
            metrics = cmd_pretrain(cfg)
            print(f"best epoch {metrics['best_epoch']}: "
                  f"mean val accuracy {metrics['best_score']:.4f}")
        elif args.command == "train":
            metrics = cmd_train(cfg)
            print(f"best epoch {metrics['best_epoch']}: "
                  f"val relative error {metrics['best_val_rel_err']:.4f}")
        elif args.command == "eval":
            seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed]
            rows = cmd_eval(cfg, seeds, args.beam_widths, args.include_oracle)
            for row in rows:
                width = "" if row.width is None else f" w={row.width}"
                std = "" if row.std is None else f" ±{row.std:.4f}"
                print(f"{row.model} size={row.size}{width}: {row.mean_rel_err:.4f}{std}")
        elif args.command == "baselines":
            for row in cmd_baselines(cfg):
                width = "" if row.width is None else f" w={row.width}"
                print(f"{row.model} size={row.size}{width}: {row.mean_rel_err:.4f}")
    except Exception as exc:  # nonzero exit on any invariant violation
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
