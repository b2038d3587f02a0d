"""Command-line interface: ``ppgof {simulate,fit,test,montecarlo,qq,ingest}``.

Exit codes are 0 on success, 2 on invalid input and 3 on numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .errors import NumericalError, PPGofError
from .estimate import fit_mle
from .gof import DEFAULT_TAU, PROCEDURES, choose_n, run_procedure
from .harness import QQ_REFERENCES, load_config, qq_data, qq_to_csv, run_experiment
from .ingest import CASE_STUDIES, load_case_study
from .models import KINDS, ModelSpec
from .simulate import SeedSpec, read_realization, realization_to_csv, simulate
from .stattests import TESTS

EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _bounds(text: str | None):
    if not text:
        return None
    return tuple(tuple(float(v) for v in pair.split(":")) for pair in text.split(","))


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _load_events(args):
    if args.catalog:
        return load_case_study(args.catalog, SeedSpec(args.jitter_seed, 0))
    if not args.events or args.horizon is None:
        raise SystemExit("an events CSV together with --horizon, or --catalog, is required")
    return read_realization(args.events, args.horizon)


def _fit(args, real):
    cutoff = args.cutoff
    if cutoff is None and args.null == "EtasTemporal":
        cutoff = 6.0 if args.catalog == "earthquake" else None
    return fit_mle(args.null, real, _bounds(args.bounds), args.n_starts, seed=args.seed, cutoff=cutoff)


def cmd_simulate(args) -> None:
    model = ModelSpec(args.kind, _floats(args.params), cutoff=args.cutoff)
    real = simulate(model, args.horizon, SeedSpec(args.seed, args.replication), allow_unstable=args.allow_unstable)
    _emit(realization_to_csv(real), args.output)


def cmd_fit(args) -> None:
    real = _load_events(args)
    _emit(_fit(args, real).to_json() + "\n", args.output)


def cmd_test(args) -> None:
    real = _load_events(args)
    fit = _fit(args, real)
    if args.n is not None:
        n = args.n
    else:
        basis = real.horizon if args.n_rule_basis == "T" else real.n_events
        n = choose_n(basis, args.n_rule_c, args.n_rule_floor)
    report = run_procedure(args.procedure, real, fit, args.test, n=n, tau=args.tau, grid_size=args.grid_size)
    _emit(report.to_json() + "\n", args.output)


def cmd_montecarlo(args) -> None:
    config = load_config(args.config)
    table = run_experiment(config, workers=args.workers)
    _emit(table.to_csv(), args.output)
    if args.log:
        Path(args.log).write_text(table.pvalue_log_csv(), encoding="utf-8", newline="\n")


def cmd_qq(args) -> None:
    with open(args.statistics, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows and args.column in rows[0]:
        col = rows[0].index(args.column)
        rows = rows[1:]
    else:
        col = 0
        if rows:
            try:
                float(rows[0][0])
            except ValueError:
                rows = rows[1:]
    values = [float(r[col]) for r in rows if r]
    _emit(qq_to_csv(qq_data(values, args.reference)), args.output)


def cmd_ingest(args) -> None:
    _emit(realization_to_csv(load_case_study(args.catalog, SeedSpec(args.seed, 0))), args.output)


def _event_args(p) -> None:
    p.add_argument("events", nargs="?", help="events CSV with columns time,coord,mark")
    p.add_argument("--horizon", type=float, help="observation window length T (required with an events CSV)")
    p.add_argument("--catalog", choices=sorted(CASE_STUDIES), help="use a bundled case-study catalog instead")
    p.add_argument("--jitter-seed", type=int, default=0)
    p.add_argument("--null", required=True, choices=KINDS)
    p.add_argument("--bounds", help="lo:hi pairs, comma separated")
    p.add_argument("--cutoff", type=float, help="magnitude cutoff M for EtasTemporal")
    p.add_argument("--n-starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="seed for the optimizer starts")
    p.add_argument("-o", "--output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppgof", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one realization to CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--params", required=True, help="comma-separated parameter vector")
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--allow-unstable", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum likelihood fit, printed as JSON")
    _event_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="fit a null family and run one goodness-of-fit test")
    _event_args(p)
    p.add_argument("--procedure", choices=PROCEDURES, default="transform")
    p.add_argument("--test", choices=sorted(TESTS), default="AD")
    p.add_argument("--n", type=int, help="number of increments (overrides the n-rule)")
    p.add_argument("--n-rule-c", type=float, default=0.25)
    p.add_argument("--n-rule-floor", type=int, default=1)
    p.add_argument("--n-rule-basis", choices=("T", "count"), default="T")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--grid-size", type=int)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("montecarlo", help="run an experiment config and print its rejection table")
    p.add_argument("config")
    p.add_argument("--workers", type=int)
    p.add_argument("--log", help="write the per-replication p-value log here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("qq", help="Q-Q pairs of a statistics sample against a reference law")
    p.add_argument("statistics", help="CSV file of statistics")
    p.add_argument("--reference", choices=QQ_REFERENCES, default="Kolmogorov")
    p.add_argument("--column", default="statistic")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_qq)

    p = sub.add_parser("ingest", help="jitter a bundled catalog into a realization CSV")
    p.add_argument("catalog", choices=sorted(CASE_STUDIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PPGofError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(f"error: {exc.code}", file=sys.stderr)
            return EXIT_INVALID
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
