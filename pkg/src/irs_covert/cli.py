"""Command-line entry point: single solves, parameter sweeps and the self-check suite."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .covertness import CovertnessBudget, epsilon_bar
from .harness import (ALGORITHMS, DEFAULT_SWEEPS, ConfigError, ExperimentConfig, SweepSpec,
                      aggregate, emit, load_config, run_algorithms, run_location_sweep,
                      run_sweep)
from .scenario import linear_to_db, sample_channels, watts_to_dbm
from .validation import validate

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

_SWEEP_COMMANDS = {"sweep-n": "elements", "sweep-eps": "epsilon", "sweep-location": "irs_x"}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors and exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON experiment config (unit-suffixed fields)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per sweep value")
    p.add_argument("--seed", type=int, help="64-bit base seed")
    p.add_argument("--algorithms", help=f"comma list from: {','.join(ALGORITHMS)}")
    p.add_argument("--allow-large", action="store_true",
                   help="run SDP-based algorithms above N = 50")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irs-covert", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="run the algorithms on one channel draw, JSON to stdout")
    _add_common(solve)
    solve.add_argument("--trial", type=int, default=0, help="trial index of the channel draw")

    for name, kind in _SWEEP_COMMANDS.items():
        sp = sub.add_parser(name, help=f"Monte Carlo sweep over {kind}")
        _add_common(sp)
        sp.add_argument("--values", help="comma list of sweep values")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--strict", action="store_true",
                        help="exit 2 if any trial failed hard")
        sp.add_argument("--timing", action="store_true",
                        help="record wall-clock times (output no longer byte-stable)")

    v = sub.add_parser("validate", help="run the oracle and invariant self-checks")
    v.add_argument("--quick", action="store_true", help="skip the SDP and grid oracles")
    return parser


def _config_from_args(args, sweep_kind: str | None) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    kw = {}
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.algorithms:
        kw["algorithms"] = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    if args.allow_large:
        kw["allow_large"] = True
    if args.workers is not None:
        kw["workers"] = args.workers
    if getattr(args, "timing", False):
        kw["record_timing"] = True
    if sweep_kind is not None:
        if getattr(args, "values", None):
            try:
                values = tuple(float(x) for x in args.values.split(","))
            except ValueError as exc:
                raise ConfigError(f"bad --values: {args.values}") from exc
            if sweep_kind == "elements":
                values = tuple(int(x) for x in values)
        elif cfg.sweep.kind == sweep_kind:
            values = cfg.sweep.values
        else:
            values = tuple(DEFAULT_SWEEPS[sweep_kind])
        kw["sweep"] = SweepSpec(sweep_kind, values)
    try:
        return cfg.with_(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _solve(cfg: ExperimentConfig, trial: int) -> dict:
    p, g = cfg.params, cfg.geometry
    channels = sample_channels(g, p, (cfg.seed, 0, trial))
    eps_bar = epsilon_bar(CovertnessBudget.from_params(p))
    results = run_algorithms(channels, p, cfg.algorithms, allow_large=cfg.allow_large,
                             eps_bar=eps_bar)
    out = {"n_elements": p.n_elements, "epsilon": p.epsilon, "seed": cfg.seed, "trial": trial,
           "designs": {}}
    for name, (d, status, secs) in results.items():
        entry = {"status": status, "wallclock_ms": round(secs * 1e3, 3)}
        if d is not None:
            entry.update(
                bob_snr_db=float(linear_to_db(max(d.bob_snr, 1e-300))),
                p_a_dbm=float(watts_to_dbm(max(d.p_a, 1e-300))),
                willie_gain_db=float(linear_to_db(max(d.willie_gain, 1e-300))),
                kl_value=float(d.kl_value),
                rho=np.asarray(d.rho).tolist(), theta=np.asarray(d.theta).tolist())
        out["designs"][name] = entry
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate":
        report = validate(quick=args.quick)
        print(report.text())
        return EXIT_OK if report.passed else EXIT_FAILED

    try:
        cfg = _config_from_args(args, _SWEEP_COMMANDS.get(args.command))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "solve":
        json.dump(_solve(cfg, args.trial), sys.stdout, indent=1)
        sys.stdout.write("\n")
        return EXIT_OK

    runner = run_location_sweep if cfg.sweep.kind == "irs_x" else run_sweep
    records = runner(cfg)
    out = args.out or cfg.output_path or None
    try:
        text = emit(records, args.format, out)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    if out is None:
        sys.stdout.write(text)
    for agg in aggregate(records):
        print(f"{cfg.sweep.kind}={agg.sweep_value:g} {agg.algorithm:<18s} "
              f"snr={agg.mean_bob_snr_db:8.3f} dB  p_a={agg.mean_p_a_dbm:7.3f} dBm  "
              f"ok={agg.ok_fraction:.2f}", file=sys.stderr)
    if args.strict and any(r.status == "failed" for r in records):
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
