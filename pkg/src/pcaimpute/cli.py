"""Command line entry points.

Subcommands:
  synth   write a synthetic complete dataset to CSV
  mask    knock out entries of a complete CSV completely at random
  impute  fill the missing entries of a CSV, directly or PCA-accelerated
  pic     train/test split classification with PCA on the observed block
  bench   full benchmark sweep from a JSON config, reports to .jsonl/.txt

Exit codes: 0 success, 1 bad input or config, 2 benchmark produced no
usable cells (every record NA).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .core import ContractError, MaskedDataset, apply_mcar, split_rows
from .evaluation import mse_masked
from .harness import (
    SyntheticSpec,
    default_partition,
    emit_report,
    generate_synthetic,
    load_csv,
    load_run_config,
    run_experiments,
    write_csv,
    write_mask_csv,
)
from .imputers import IMPUTER_KINDS, ImputerSpec
from .pipelines import PipelineSpec, pcai_impute, pic_run, traditional_impute


class _Parser(argparse.ArgumentParser):
    """Argument errors are bad input, so exit 1 (2 is reserved for a sweep
    where every cell came back NA)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pcaimpute",
        description="Missing data imputation with a PCA shortcut on the "
        "fully observed columns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic complete dataset")
    p_synth.add_argument("--rows", type=_positive_int, required=True)
    p_synth.add_argument("--cols", type=_positive_int, required=True)
    p_synth.add_argument("--rank", type=_positive_int, required=True)
    p_synth.add_argument("--sigma", type=float, default=0.01)
    p_synth.add_argument("--classes", type=_positive_int, default=2)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output CSV path")

    p_mask = sub.add_parser("mask", help="apply missing-completely-at-random holes")
    p_mask.add_argument("csv", help="complete input CSV")
    p_mask.add_argument("--label-column", default=None)
    p_mask.add_argument("--rate", type=float, required=True)
    p_mask.add_argument("--q", type=int, default=None,
                        help="observed-block width (default ceil(5p/6))")
    p_mask.add_argument("--seed", type=int, default=0)
    p_mask.add_argument("--out", required=True, help="output CSV path")
    p_mask.add_argument("--mask-out", default=None, help="optional 0/1 mask CSV")

    p_imp = sub.add_parser("impute", help="fill missing entries of a CSV")
    p_imp.add_argument("csv", help="input CSV with missing cells")
    p_imp.add_argument("--label-column", default=None)
    p_imp.add_argument("--imputer", choices=IMPUTER_KINDS, default="mean")
    p_imp.add_argument("--accelerated", action="store_true",
                       help="impute PCA scores of the observed block instead "
                       "of the block itself")
    p_imp.add_argument("--variance-target", type=float, default=0.95)
    p_imp.add_argument("--truth", default=None,
                       help="complete CSV to score the fill against")
    p_imp.add_argument("--seed", type=int, default=0)
    p_imp.add_argument("--out", required=True, help="output CSV path")

    p_pic = sub.add_parser("pic", help="split, impute and classify")
    p_pic.add_argument("csv", help="input CSV (may contain missing cells)")
    p_pic.add_argument("--label-column", required=True)
    p_pic.add_argument("--imputer", choices=IMPUTER_KINDS, default="mean")
    p_pic.add_argument("--reduce-missing", action="store_true",
                       help="also compress the imputed block with a second PCA")
    p_pic.add_argument("--variance-target", type=float, default=0.95)
    p_pic.add_argument("--test-fraction", type=float, default=0.2)
    p_pic.add_argument("--seed", type=int, default=0)

    p_bench = sub.add_parser("bench", help="run a benchmark sweep")
    p_bench.add_argument("config", help="JSON config file")
    p_bench.add_argument("--seed", type=int, default=None, help="override config seed")
    p_bench.add_argument("--output", default=None, help="override report base path")
    p_bench.add_argument("--time-budget", type=float, default=None,
                         dest="time_budget_seconds",
                         help="override per-cell budget in seconds")
    return parser


def _restore_order(values: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    inverse = np.argsort(permutation)
    return values[:, inverse]


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(args.rows, args.cols, args.rank, args.sigma,
                         args.classes, args.seed)
    ds = generate_synthetic(spec)
    write_csv(args.out, ds)
    print(f"wrote {ds.n_rows} x {ds.n_cols} dataset to {args.out}")
    return 0


def _cmd_mask(args) -> int:
    loaded = load_csv(args.csv, args.label_column)
    ds = loaded.dataset
    if ds.mask.any():
        raise ContractError(f"{args.csv} already has missing entries")
    q = args.q if args.q is not None else default_partition(ds.n_cols)
    masked = apply_mcar(ds.with_partition(q), args.rate, args.seed)
    # the rearranged column order goes to disk as-is: a later load re-derives
    # the partition from which columns actually contain holes
    write_csv(args.out, masked, loaded.feature_names,
              args.label_column or "label", loaded.label_names)
    if args.mask_out:
        write_mask_csv(args.mask_out, masked, loaded.feature_names)
    print(f"masked {masked.n_missing()} of {masked.n_rows * (masked.n_cols - q)} "
          f"entries in the last {masked.n_cols - q} columns; wrote {args.out}")
    return 0


def _cmd_impute(args) -> int:
    loaded = load_csv(args.csv, args.label_column)
    ds = loaded.dataset
    spec = ImputerSpec(args.imputer)
    if args.accelerated:
        if ds.q == 0:
            raise ContractError("accelerated mode needs at least one fully "
                                "observed column")
        m_prime, model = pcai_impute(ds, spec, args.variance_target)
        completed = np.concatenate([ds.observed_block, m_prime], axis=1)
        print(f"kept {model.k} of {ds.q} observed columns as PCA scores")
    else:
        completed = traditional_impute(ds, spec).completed
    out = MaskedDataset(completed, np.zeros_like(ds.mask), ds.n_cols, ds.labels)
    write_csv(args.out, out, loaded.feature_names,
              args.label_column or "label", loaded.label_names)
    if args.truth:
        truth = load_csv(args.truth, args.label_column).dataset
        if truth.data.shape != ds.data.shape:
            raise ContractError("truth CSV shape does not match input")
        print(f"mse over imputed entries: "
              f"{mse_masked(completed, truth.data, ds.mask):.6f}")
    print(f"filled {ds.n_missing()} entries; wrote {args.out}")
    return 0


def _cmd_pic(args) -> int:
    loaded = load_csv(args.csv, args.label_column)
    ds = loaded.dataset
    train, test = split_rows(ds, args.test_fraction, args.seed)
    spec = PipelineSpec(
        strategy="pic_reduce" if args.reduce_missing else "pic",
        imputer=ImputerSpec(args.imputer),
        variance_target=args.variance_target,
        seed=args.seed,
    )
    model, accuracy, timings = pic_run(train, test, spec)
    print(f"train rows: {train.n_rows}  test rows: {test.n_rows}")
    print(f"observed-block components: {model.pca_f.k}")
    if model.pca_m is not None:
        print(f"missing-block components: {model.pca_m.k}")
    for stage in ("pca_fit", "project", "impute", "train", "evaluate"):
        if stage in timings:
            print(f"{stage}: {timings[stage]:.3f}s")
    print(f"test accuracy: {accuracy:.4f}")
    return 0


def _cmd_bench(args) -> int:
    overrides = {
        "seed": args.seed,
        "output": args.output,
        "time_budget_seconds": args.time_budget_seconds,
    }
    config = load_run_config(args.config, overrides)
    records = run_experiments(config)
    jsonl_path, table_path = emit_report(records, config.output)
    with open(table_path) as fh:
        sys.stdout.write(fh.read())
    print(f"wrote {jsonl_path} and {table_path}")
    if all(r.na for r in records):
        print("every cell came back NA", file=sys.stderr)
        return 2
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "mask": _cmd_mask,
    "impute": _cmd_impute,
    "pic": _cmd_pic,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ContractError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
