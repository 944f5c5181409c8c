"""Command line interface: ``ppp <subcommand> ...``.

Exit codes: 0 on success, 1 on invalid input or usage, 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    config_snapshot,
    experiment_from_config,
    grid_from_config,
    link_from_config,
    load_config,
    mcmc_from_config,
    prior_from_config,
    truth_from_config,
)
from .divergence import divergence_report
from .experiment import run_lemma1_sweep, run_rate_experiment
from .grid import check_same_grid, read_intensity_csv, write_field_csv, write_grid_json
from .mcmc import fit_posterior, posterior_summary
from .point_process import log_likelihood, read_dataset, simulate_ppp, write_dataset

log = logging.getLogger("pppbayes")

MAX_SAVED_DRAWS = 200


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        return obj.__dict__
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dump(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _write_manifest(out: Path, command: str, args, cp=None, **extra) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "argv": {k: v for k, v in vars(args).items() if k != "func"},
        "config": config_snapshot(cp) if cp is not None else None,
        **extra,
    }
    _dump(manifest, out / "manifest.json")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    cp = load_config(args.config, args.set)
    grid = grid_from_config(cp)
    link = link_from_config(cp)
    truth = truth_from_config(cp).build(grid, link.kappa if link.kappa > 0 else 1e-12)
    n = args.n if args.n is not None else cp.getint("experiment", "n", fallback=100)
    data = simulate_ppp(truth, n, args.seed)
    out = _out_dir(args.out)
    write_dataset(data, out / "data")
    write_field_csv(truth, out / "truth.csv")
    write_grid_json(grid, out / "grid.json")
    _write_manifest(out, "simulate", args, cp, seeds={"data": args.seed}, n=n)
    print(out / "data")
    return 0


def cmd_loglik(args) -> int:
    lam = read_intensity_csv(args.lambda_, args.kappa)
    data = read_dataset(args.data)
    value = log_likelihood(lam, data)
    print(repr(value))
    if args.out:
        out = _out_dir(args.out)
        _dump({"log_likelihood": value}, out / "loglik.json")
        _write_manifest(out, "loglik", args)
    return 0


def cmd_divergence(args) -> int:
    l1 = read_intensity_csv(args.lambda1, args.kappa)
    l2 = read_intensity_csv(args.lambda2, args.kappa)
    check_same_grid(l1, l2)
    report = divergence_report(l1, l2, mc_oracle=args.mc_oracle, n_patterns=args.patterns, seed=args.seed)
    text = _dump(report.to_dict())
    print(text)
    if args.out:
        out = _out_dir(args.out)
        (out / "divergence.json").write_text(text + "\n")
        _write_manifest(out, "divergence", args, seeds={"oracle": args.seed})
    return 0


def cmd_fit(args) -> int:
    cp = load_config(args.config, args.set)
    grid = grid_from_config(cp)
    prior, link = prior_from_config(cp), link_from_config(cp)
    mcmc = mcmc_from_config(cp, seed=args.seed)
    data = read_dataset(args.data)
    truth = read_intensity_csv(args.truth, link.kappa) if args.truth else None
    draws = fit_posterior(prior, link, data, mcmc, grid)
    summary = posterior_summary(draws, truth)
    out = _out_dir(args.out)

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(grid.dim)] + ["mean", "lower90", "upper90"])
        for node, m, lo, hi in zip(grid.nodes, summary.mean, summary.lower, summary.upper):
            writer.writerow([repr(float(c)) for c in node] + [repr(float(m)), repr(float(lo)), repr(float(hi))])
    keep = np.unique(np.linspace(0, len(draws) - 1, min(MAX_SAVED_DRAWS, len(draws))).round().astype(int))
    with open(out / "draws.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw"] + [f"node{i}" for i in range(grid.size)])
        for i in keep:
            writer.writerow([int(i)] + [repr(float(v)) for v in draws.intensity[i]])
    diagnostics = {
        "acceptance_rate": draws.acceptance_rate,
        "s_final": draws.s_final,
        "a_acceptance_rate": draws.a_acceptance_rate,
        "runtime": draws.runtime,
        "draws": len(draws),
    }
    if truth is not None:
        diagnostics["median_rho"] = summary.median_rho
        diagnostics["median_l2"] = summary.median_l2
    _dump(diagnostics, out / "diagnostics.json")
    _write_manifest(out, "fit", args, cp, seeds={"chain": mcmc.seed})
    print(_dump(diagnostics))
    return 0


def cmd_rate_experiment(args) -> int:
    cp = load_config(args.config, args.set)
    cfg = experiment_from_config(cp, seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    report = run_rate_experiment(cfg)
    out = _out_dir(args.out)
    _dump(report.to_dict(), out / "rate_report.json")
    cells_dir = _out_dir(out / "cells")
    for cell in report.cells:
        s = cell["summary"]
        with open(cells_dir / f"n{cell['n']}_rep{cell['replicate']}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{k}" for k in range(cfg.grid.dim)] + ["mean", "lower90", "upper90"])
            for node, m, lo, hi in zip(cfg.grid.nodes, s.mean, s.lower, s.upper):
                writer.writerow([repr(float(c)) for c in node] + [repr(float(m)), repr(float(lo)), repr(float(hi))])
    _write_manifest(out, "rate-experiment", args, cp, seeds={"base": cfg.seed}, config_hash=report.config_hash)
    print(_dump({"slope": report.slope, "slope_stderr": report.slope_stderr,
                 "expected_exponent": report.expected_exponent}))
    return 0


def cmd_lemma1_sweep(args) -> int:
    cp = load_config(args.config, args.set)
    grid = grid_from_config(cp)
    prior, link = prior_from_config(cp), link_from_config(cp)
    report = run_lemma1_sweep(prior, link, grid, args.pairs, args.seed)
    text = _dump(report.to_dict())
    print(text)
    if args.out:
        out = _out_dir(args.out)
        (out / "lemma1_sweep.json").write_text(text + "\n")
        _write_manifest(out, "lemma1-sweep", args, cp, seeds={"sweep": args.seed})
    return 0 if report.violations == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p, out_required=True):
        p.add_argument("--config", help="INI config with [grid] [prior] [link] [mcmc] [experiment]")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key; repeatable")
        p.add_argument("--out", required=out_required)

    p = sub.add_parser("simulate", help="simulate i.i.d. patterns from the configured truth")
    with_config(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("loglik", help="log-likelihood of a dataset under an intensity CSV")
    p.add_argument("--lambda", dest="lambda_", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_loglik)

    p = sub.add_parser("divergence", help="Hellinger, KL and V between two intensity CSVs")
    p.add_argument("--lambda1", required=True)
    p.add_argument("--lambda2", required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--mc-oracle", action="store_true")
    p.add_argument("--patterns", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("fit", help="sample the posterior for a simulated dataset")
    with_config(p)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--truth", help="intensity CSV to measure posterior distances against")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("rate-experiment", help="contraction-rate experiment over a grid of n")
    with_config(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_rate_experiment)

    p = sub.add_parser("lemma1-sweep", help="check divergence bounds on random prior-path pairs")
    with_config(p, out_required=False)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lemma1_sweep)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ppp: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"ppp: runtime failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"ppp: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.exception("run failed")
        print(f"ppp: runtime failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
