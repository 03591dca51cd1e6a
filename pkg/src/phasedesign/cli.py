"""Command line entry point: ``phasedesign <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input, unwritable output or failed
verification, 3 numerical collapse (a design degenerated to the zero matrix
or a sweep cell could not be run).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .design import DesignBudget, DesignCollapsedError, EigenvalueTieError, MeasurementMatrix
from .harness import (DESIGNED, ConfigError, ExperimentConfig, build_design, covariance_for,
                      frobenius_csv, frobenius_json, results_csv, results_json,
                      run_complexity_sweep, run_frobenius_comparison, run_snr_sweep, write_text)
from .verify import run_all

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_COLLAPSE = 3


def _load_config(args, **defaults) -> ExperimentConfig:
    data = dict(defaults)
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = ExperimentConfig.from_json(text)
        data = cfg.to_dict() | {k: v for k, v in defaults.items() if k == "sweep"}
    overrides = {
        "master_seed": getattr(args, "seed", None),
        "trials": getattr(args, "trials", None),
        "recovery": getattr(args, "recovery", None),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def _emit(text: str, out: str | None) -> None:
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_design(args) -> int:
    cfg = _load_config(args)
    if args.label not in DESIGNED:
        raise ConfigError(f"label must be one of {DESIGNED}")
    m = args.m if args.m is not None else cfg.fixed_m
    snr = args.snr_db if args.snr_db is not None else cfg.fixed_snr_db
    budget = DesignBudget.from_snr_db(m, cfg.n, snr)
    if args.label in ("MF", "MF_I") and m % cfg.n:
        raise ConfigError("masked Fourier needs m to be a multiple of n")
    a = build_design(args.label, covariance_for(cfg), budget, cfg.design_max_iters,
                     cfg.design_tol, cfg.multi_start, cfg.master_seed)
    _emit(MeasurementMatrix(a, args.label, budget.p).to_json() + "\n", args.out)
    return EXIT_OK


def _sweep(args, runner, sweep: str) -> int:
    cfg = _load_config(args, sweep=sweep)
    table = runner(cfg)
    _emit(results_csv(table) if args.format == "csv" else results_json(table), args.out)
    for f in table.failed_cells:
        print(f"failed cell {f['label']} snr={f['snr_db']} m={f['m']}: {f['reason']}", file=sys.stderr)
    return EXIT_COLLAPSE if table.failed_cells else EXIT_OK


def cmd_frobenius(args) -> int:
    cfg = _load_config(args)
    rows = run_frobenius_comparison(cfg)
    _emit(frobenius_csv(rows) if args.format == "csv" else frobenius_json(rows), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = run_all(args.seed or 0)
    lines = "".join(c.line() + "\n" for c in checks)
    _emit(lines, args.out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasedesign",
                                description="Design and evaluate phase retrieval measurement matrices.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sweep=True):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, help="master seed override")
        if sweep:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
            sp.add_argument("--trials", type=int, help="trials per cell override")
            sp.add_argument("--recovery", choices=("taf", "altmin"), help="recovery algorithm override")

    d = sub.add_parser("design", help="emit a designed matrix as JSON")
    common(d, sweep=False)
    d.add_argument("--label", default="UC", help="UC, MF, UC_I, MF_I or OK")
    d.add_argument("--m", type=int)
    d.add_argument("--snr-db", type=float)
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("snr-sweep", help="error versus SNR at fixed m")
    common(s)
    s.set_defaults(func=lambda a: _sweep(a, run_snr_sweep, "snr"))

    c = sub.add_parser("complexity-sweep", help="error versus m/n at fixed SNR")
    common(c)
    c.set_defaults(func=lambda a: _sweep(a, run_complexity_sweep, "complexity"))

    f = sub.add_parser("frobenius-table", help="alignment objective with and without optimized V")
    common(f)
    f.set_defaults(func=cmd_frobenius)

    v = sub.add_parser("verify", help="run the built-in identity checks")
    v.add_argument("--out")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EigenvalueTieError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DesignCollapsedError as exc:
        print(f"numerical collapse: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except (ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
