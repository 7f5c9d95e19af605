"""Command-line entry point.

    dagconv run config.yaml [--set model.kind=pdcn ...]
    dagconv sweep config.yaml --param data.noise --values 0,0.1,0.2 [--models dcn,ls]
    dagconv gen-data config.yaml --out data/
    dagconv validate graph.csv

Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import experiment as ex
from .dag import transitive_closure
from .errors import (
    DagError,
    DimensionMismatch,
    EmptyMask,
    EmptySubset,
    InvalidParams,
    LabelOutOfRange,
    MalformedData,
    MaskCoversAll,
    NumericalFailure,
    ParseError,
    TooFewSamples,
    ZeroNormTarget,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_CONFIG_ERRORS = (ParseError, InvalidParams)
_DATA_ERRORS = (DagError, DimensionMismatch, MalformedData, MaskCoversAll, EmptyMask, EmptySubset, TooFewSamples, LabelOutOfRange, OSError)
_NUMERIC_ERRORS = (NumericalFailure, ZeroNormTarget, np.linalg.LinAlgError, FloatingPointError)


def _values(text: str) -> list:
    return [ex._yaml(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dagconv", description="Causal DAG convolution experiments.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def with_config(p):
        p.add_argument("config")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry by dotted path, e.g. train.epochs=20")

    p = sub.add_parser("run", help="run all trials of a config")
    with_config(p)
    p.add_argument("--output-dir")

    p = sub.add_parser("sweep", help="rerun a config over values of one parameter")
    with_config(p)
    p.add_argument("--param", required=True, help="dotted config path, e.g. data.noise")
    p.add_argument("--values", required=True, type=_values, help="comma-separated values")
    p.add_argument("--models", type=lambda s: [m.strip() for m in s.split(",") if m.strip()],
                   help="comma-separated model kinds (default: the config's)")
    p.add_argument("--output-dir")

    p = sub.add_parser("gen-data", help="write the graph and data of one trial")
    with_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("validate", help="check an edge-list file")
    p.add_argument("graph")
    return ap


def _load(args) -> ex.ExperimentConfig:
    overrides = list(args.overrides)
    if getattr(args, "output_dir", None):
        overrides.append(f"output_dir={args.output_dir}")
    return ex.parse_config(args.config, overrides)


def cmd_run(args) -> int:
    bundle = ex.run_experiment(_load(args))
    sys.stdout.write(bundle.table())
    if bundle.output_dir:
        print(f"results: {bundle.output_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rows = ex.run_sweep(cfg, args.param, args.values, args.models)
    sys.stdout.write(ex.csv_text(rows, ex.SWEEP_COLUMNS))
    return EXIT_OK


def cmd_gen_data(args) -> int:
    out = ex.export_dataset(_load(args), args.out, args.trial)
    print(f"data: {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    d = ex.ingest_graph_csv(args.graph)
    w = transitive_closure(d).w
    parents = np.zeros(d.n, dtype=int)
    children = np.zeros(d.n, dtype=int)
    for i, j, _ in d.edges:
        parents[i] += 1
        children[j] += 1
    print(f"nodes: {d.n}")
    print(f"edges: {d.num_edges}")
    print(f"sources: {np.flatnonzero(parents == 0).tolist()}")
    print(f"sinks: {np.flatnonzero(children == 0).tolist()}")
    print(f"order: {list(d.order)}")
    print(f"reachable pairs: {int(np.count_nonzero(np.abs(w) > 1e-12)) - d.n}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "gen-data": cmd_gen_data, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
