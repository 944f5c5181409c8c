"""Contraction-rate experiments and the Lipschitz bound sweep."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .config import ConfigError, RateExperimentConfig
from .divergence import lemma1_bound_check
from .gp_prior import GpPriorSpec, sample_latent
from .grid import GridSpec
from .link import LinkSpec
from .mcmc import fit_posterior, posterior_summary
from .point_process import simulate_ppp


def cell_seeds(seed: int, n_index: int, replicate: int) -> tuple[int, int]:
    """Data and chain seeds for one ``(n, replicate)`` cell."""
    data_seed, chain_seed = np.random.SeedSequence([seed, n_index, replicate]).generate_state(2)
    return int(data_seed), int(chain_seed)


def log_factor_exponent(beta: float, dim: int) -> float:
    """Exponent of ``log n`` in the rate of the adaptive rescaled prior."""
    return (1 + dim) * (4 * beta + dim) / (4 * beta + 2 * dim)


@dataclass
class RateReport:
    cells: list
    slope: float
    slope_stderr: float
    intercept: float
    expected_exponent: float
    median_rho_by_n: dict
    config: dict
    config_hash: str
    log_factor_exponent: float | None = None
    runtime: dict = field(default_factory=dict)

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = {
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "expected_exponent": self.expected_exponent,
            "log_factor_exponent": self.log_factor_exponent,
            "median_rho_by_n": {str(k): v for k, v in self.median_rho_by_n.items()},
            "cells": [{k: v for k, v in c.items() if k != "summary"} for c in self.cells],
            "config": self.config,
            "config_hash": self.config_hash,
        }
        if include_runtime:
            d["runtime"] = self.runtime
        return d


def _run_cell(cfg: RateExperimentConfig, truth, n_index: int, n: int, replicate: int) -> dict:
    data_seed, chain_seed = cell_seeds(cfg.seed, n_index, replicate)
    data = simulate_ppp(truth, n, data_seed)
    mcmc = replace(cfg.mcmc, seed=chain_seed)
    draws = fit_posterior(cfg.prior, cfg.link, data, mcmc, cfg.grid)
    summary = posterior_summary(draws, truth, radii=cfg.radii)
    return {
        "n": n,
        "replicate": replicate,
        "data_seed": data_seed,
        "chain_seed": chain_seed,
        "median_rho": summary.median_rho,
        "median_l2": summary.median_l2,
        "mass_outside": {str(r): m for r, m in summary.mass_outside.items()},
        "acceptance_rate": draws.acceptance_rate,
        "s_final": draws.s_final,
        "median_a": None if draws.a_draws is None else float(np.median(draws.a_draws)),
        "runtime": draws.runtime,
        "summary": summary,
    }


def _cell_job(args):
    return _run_cell(*args)


def run_rate_experiment(cfg: RateExperimentConfig) -> RateReport:
    """Fit the posterior on ``replicates_per_n`` datasets per sample size and regress
    ``log(median rho)`` on ``log n``.
    """
    started = time.perf_counter()
    truth = cfg.truth.build(cfg.grid, cfg.link.kappa)
    if truth.values.min() < cfg.link.kappa:
        raise ConfigError("true intensity drops below kappa")
    if cfg.link.invertible:
        hi = cfg.link.kappa + cfg.link.g_star
        if truth.values.min() <= cfg.link.kappa or truth.values.max() >= hi:
            raise ConfigError(f"true intensity leaves the open link range ({cfg.link.kappa}, {hi})")

    jobs = [
        (cfg, truth, i, n, r) for i, n in enumerate(cfg.n_grid) for r in range(cfg.replicates_per_n)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            cells = list(pool.map(_cell_job, jobs))
    else:
        cells = [_cell_job(j) for j in jobs]
    cells.sort(key=lambda c: (c["n"], c["replicate"]))

    log_n = np.log([c["n"] for c in cells])
    log_rho = np.log([c["median_rho"] for c in cells])
    fit = stats.linregress(log_n, log_rho)
    by_n = {n: float(np.median([c["median_rho"] for c in cells if c["n"] == n])) for n in cfg.n_grid}
    runtime = {
        "total_seconds": time.perf_counter() - started,
        "cell_seconds": [c["runtime"] for c in cells],
    }
    for c in cells:
        c.pop("runtime")
    return RateReport(
        cells=cells,
        slope=float(fit.slope),
        slope_stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        expected_exponent=cfg.exponent,
        median_rho_by_n=by_n,
        config=cfg.to_dict(),
        config_hash=cfg.digest(),
        log_factor_exponent=(
            log_factor_exponent(cfg.prior.hurst_beta, cfg.grid.dim) if cfg.prior.kind == "rescaled_field" else None
        ),
        runtime=runtime,
    )


# ------------------------------------------------------------ bound sweep


@dataclass
class SweepReport:
    pairs: int
    violations: int
    violation_details: list
    min_relative_margin: dict
    max_hellinger_sq_over_kl: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_lemma1_sweep(
    prior: GpPriorSpec, link: LinkSpec, grid: GridSpec, pairs: int, seed: int, identical: bool = False
) -> SweepReport:
    """Check the Lipschitz divergence bounds on independent pairs of prior paths.

    ``identical=True`` uses the same path for both members of every pair.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(2 * pairs)
    min_margin = {"hellinger": np.inf, "kl": np.inf, "v": np.inf}
    details = []
    ratio = 0.0
    for i in range(pairs):
        w = sample_latent(prior, grid, int(seeds[2 * i]))
        v = w if identical else sample_latent(prior, grid, int(seeds[2 * i + 1]))
        rep = lemma1_bound_check(w, v, link)
        for key, m in rep.relative_margins.items():
            min_margin[key] = min(min_margin[key], m)
        if rep.kl > 0:
            ratio = max(ratio, rep.hellinger**2 / rep.kl)
        if not rep.ok:
            details.append({"pair": i, "failed": rep.violations, "margins": rep.margins})
    return SweepReport(
        pairs=pairs,
        violations=len(details),
        violation_details=details,
        min_relative_margin={k: float(v) for k, v in min_margin.items()},
        max_hellinger_sq_over_kl=float(ratio),
    )

