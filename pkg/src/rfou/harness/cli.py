"""Command-line interface.

Exit codes: 0 success, 1 invalid configuration, 2 a suite ran but at least
one acceptance check failed.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from ..errors import ParameterError
from ..fgn import make_kernels, sample_noise
from ..fraccalc import Grid
from ..infer import mle, sequential_mle, write_estimates_csv
from ..reflect import simulate_rfou, write_path_csv
from .config import KINDS, ExperimentConfig, load_config_file
from .suites import _clean, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_CHECKS = 0, 1, 2

_FLAGS = [
    ("--hurst", float), ("--alpha", float), ("--sigma", float), ("--barrier", float),
    ("--x0", float), ("--horizon", float), ("--steps", int), ("--reps", int),
    ("--h-level", float), ("--max-horizon", float), ("--dt", float), ("--seed", int),
    ("--workers", int), ("--out", str),
]


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    for flag, typ in _FLAGS:
        shared.add_argument(flag, type=typ, default=None)
    shared.add_argument("--format", choices=("csv", "json"), default=None)
    shared.add_argument("--config", default=None, help="JSON file with flag values; flags override it")

    p = argparse.ArgumentParser(prog="rfou", description="Reflected fractional OU simulation and drift estimation.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[shared], help="simulate one path (CSV t,X,L,WH)")
    sub.add_parser("estimate", parents=[shared], help="simulate one path and compute the fixed-horizon MLE")
    sub.add_parser("sequential", parents=[shared], help="run the sequential estimator --reps times")
    s = sub.add_parser("suite", parents=[shared], help="run a Monte Carlo suite with acceptance checks")
    s.add_argument("--kind", choices=[k for k in KINDS if k != "queue-demo"], default=None)
    sub.add_parser("queue-demo", parents=[shared], help="queue-to-RFOU scaling demo")
    return p


def _config(args, kind: str | None) -> ExperimentConfig:
    data = load_config_file(args.config) if args.config else {}
    for flag, _ in _FLAGS + [("--format", str)]:
        key = flag[2:].replace("-", "_")
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if kind is not None:
        data["kind"] = kind
    elif getattr(args, "kind", None) is not None:
        data["kind"] = args.kind
    return ExperimentConfig.from_mapping(data)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _simulate(cfg: ExperimentConfig):
    ks = make_kernels(cfg.hurst, Grid(cfg.horizon, cfg.steps))
    return simulate_rfou(cfg.model, sample_noise(ks, np.random.default_rng(cfg.seed))), ks


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = {"sequential": "sequential", "queue-demo": "queue-demo"}.get(args.command)
    try:
        cfg = _config(args, kind)
    except (ParameterError, TypeError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "simulate":
            path, _ = _simulate(cfg)
            if cfg.format == "csv":
                buf = io.StringIO()
                write_path_csv(buf, path)
                _emit(buf.getvalue(), cfg.out)
            else:
                doc = {"t": path.times.tolist(), "X": path.X.tolist(), "L": path.L.tolist(),
                       "WH": path.noise.fbm.values.tolist(), "config": cfg.echo()}
                _emit(json.dumps(doc) + "\n", cfg.out)
            return EXIT_OK

        if args.command in ("estimate", "sequential"):
            if args.command == "estimate":
                path, ks = _simulate(cfg)
                records = [mle(path, ks, alpha_true=cfg.alpha)]
            else:
                records = [
                    sequential_mle(cfg.model, cfg.h_level, np.random.SeedSequence(cfg.seed, spawn_key=(i,)),
                                   cfg.max_horizon, cfg.dt, alpha_true=cfg.alpha)
                    for i in range(cfg.reps)
                ]
            if cfg.format == "csv":
                buf = io.StringIO()
                write_estimates_csv(buf, records)
                _emit(buf.getvalue(), cfg.out)
            else:
                doc = {"config": cfg.echo(), "records": _clean([r.row() for r in records])}
                _emit(json.dumps(doc, sort_keys=True, indent=1) + "\n", cfg.out)
            return EXIT_OK
    except ParameterError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    # suite / queue-demo
    try:
        report = run_experiment(cfg)
    except ParameterError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.format == "csv":
        _emit(_records_csv(report.records), cfg.out)
    else:
        _emit(report.to_json() + "\n", cfg.out)
    for line in report.check_lines():
        print(line, file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECKS


def _records_csv(records: list) -> str:
    keys: list[str] = []
    for r in records:
        keys += [k for k in r if k not in keys]
    lines = [",".join(keys)]
    for r in records:
        lines.append(",".join("" if r.get(k) is None else str(r.get(k)) for k in keys))
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    sys.exit(main())
