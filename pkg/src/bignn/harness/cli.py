"""Command line entry point: ``bignn <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from ..core import ConfigError, DataError, ParameterError, RngStream
from ..denoise import predict_denoised_batch, pretrain
from ..ensemble import FixedK, OracleDividedK, TheoryK, predict_batch, train
from ..metrics import cell_means, fit_rate, read_results, write_rate_summary, write_results
from ..serialization import load_model, save_model
from .config import RealDatasetSpec, load_spec
from .ingest import load_csv, load_queries
from .runner import gamma_slopes, run, speedups

EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("bignn")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON experiment description")
    p.add_argument("--preset", metavar="NAME", help="named preset, e.g. sim1 or sim1-desk")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed")
    p.add_argument("--out", metavar="PATH", help="results CSV (default: stdout)")
    p.add_argument("--threads", type=int, metavar="N", help="replication workers")
    p.add_argument("--replications", type=int, metavar="R", help="override replication count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bignn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("sim1", "rate study with theory-driven k"),
                        ("sim2", "fixed-k study over gamma"),
                        ("denoise-bench", "denoised bigNN against bigNN"),
                        ("real", "oracle kNN against bigNN on a CSV dataset")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "real":
            p.add_argument("--data", metavar="PATH", help="dataset CSV (overrides config)")

    p = sub.add_parser("fit-rate", help="fit log(value) ~ factor(gamma) + log(N) on a results CSV")
    p.add_argument("results", metavar="RESULTS_CSV")
    p.add_argument("--out", metavar="PATH", help="rate summary CSV (default: stdout)")
    p.add_argument("--method", default="bignn", help="rows to use (default: bignn)")
    p.add_argument("--kinds", default="regret,cis", help="comma separated value kinds")

    p = sub.add_parser("train", help="train a model on a CSV dataset and save it")
    p.add_argument("data", metavar="DATA_CSV")
    p.add_argument("--out", required=True, metavar="PATH")
    p.add_argument("--gamma", type=float, default=0.0)
    rule = p.add_mutually_exclusive_group()
    rule.add_argument("--k", type=int, help="fixed local k")
    rule.add_argument("--k-oracle", type=int, help="oracle k, divided by s")
    rule.add_argument("--alpha", type=float, help="theory rule smoothness exponent")
    p.add_argument("--k-o", type=float, default=1.0)
    p.add_argument("--theta", type=float, help="also pre-train a denoised model")
    p.add_argument("--repeats", type=int, default=9, help="prediction subsamples I")
    p.add_argument("--label-column", default="-1")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="classify a CSV of query points with a saved model")
    p.add_argument("model", metavar="MODEL")
    p.add_argument("queries", metavar="QUERIES_CSV")
    p.add_argument("--out", metavar="PATH", help="predictions CSV (default: stdout)")
    p.add_argument("--no-denoise", action="store_true", help="use the bigNN model even if denoised data is saved")
    return parser


def cmd_experiment(args) -> int:
    overrides = dict(master_seed=args.seed, threads=args.threads, replications=args.replications)
    if getattr(args, "data", None):
        overrides["data_path"] = args.data
    spec = load_spec(args.config, kind=args.command, preset=args.preset, **overrides)
    rows = run(spec)
    write_results(rows, args.out or spec.output or sys.stdout)
    if spec.kind == "sim1":
        for kind in ("regret", "cis"):
            fit = fit_rate(cell_means(rows, kind), kind)
            print(f"{kind}: slope {fit.slope:.4f} (se {fit.stderr:.4f}), correlation {fit.correlation:.4f}", file=sys.stderr)
    elif spec.kind == "sim2":
        for N, slope in gamma_slopes(rows).items():
            print(f"N={N}: d log(regret)/d gamma = {slope:.4f}", file=sys.stderr)
    elif spec.kind == "real":
        for g, sp in speedups(rows).items():
            print(f"gamma={g}: speedup {sp:.2f}", file=sys.stderr)
    return 0


def cmd_fit_rate(args) -> int:
    rows = read_results(args.results)
    fits = []
    for kind in [k.strip() for k in args.kinds.split(",") if k.strip()]:
        cells = cell_means(rows, kind, args.method)
        if not cells:
            log.warning("no %s values for method %s; skipped", kind, args.method)
            continue
        fits.append(fit_rate(cells, kind))
    write_rate_summary(fits, args.out or sys.stdout)
    return 0


def cmd_train(args) -> int:
    label_col = int(args.label_column) if args.label_column.lstrip("-").isdigit() else args.label_column
    data = load_csv(args.data, RealDatasetSpec(path=args.data, label_column=label_col))
    if args.k is not None:
        rule = FixedK(args.k)
    elif args.k_oracle is not None:
        rule = OracleDividedK(args.k_oracle)
    elif args.alpha is not None:
        rule = TheoryK(args.alpha, args.k_o)
    else:
        raise ConfigError("choose a k rule: --k, --k-oracle or --alpha")
    root = RngStream(args.seed)
    model = train(data, args.gamma, rule, root.child("partition"))
    den = None
    if args.theta is not None:
        den = pretrain(model, data, args.theta, args.repeats, root.child("denoise"))
    save_model(args.out, model, den)
    extra = f", denoised m={den.m} I={den.I}" if den else ""
    print(f"saved s={model.s} k_local={model.k_local}{extra} to {args.out}", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    model, den = load_model(args.model)
    Q = load_queries(args.queries, model.dim)
    if den is not None and not args.no_denoise:
        labels = predict_denoised_batch(den, Q)
    else:
        labels = predict_batch(model, Q)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["label"])
        w.writerows([[int(v)] for v in np.asarray(labels)])
    finally:
        if args.out:
            out.close()
    return 0


COMMANDS = {"fit-rate": cmd_fit_rate, "train": cmd_train, "predict": cmd_predict}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = COMMANDS.get(args.command, cmd_experiment)
    try:
        return handler(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
