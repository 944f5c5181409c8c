"""Posterior sampling for intensities under a transformed Gaussian prior.

The latent field is written ``w = B z`` with ``z`` standard normal (see
:func:`pppbayes.gp_prior.latent_operator`). The chain moves ``z`` with
prior-reversible proposals ``z' = sqrt(1 - s^2) z + s xi``, so the
acceptance ratio only involves the likelihood. For the rescaled field the
rescaling ``A`` is updated every few sweeps by a random walk on ``log A``
with ``z`` held fixed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .divergence import hellinger_to_many
from .gp_prior import GpPriorSpec, latent_operator, log_rescaling_density
from .grid import GridSpec, IntensityField, LatentField
from .link import LinkSpec
from .point_process import Dataset


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 20_000
    burn_in: int = 5_000
    thin: int = 10
    pcn_step: float = 0.5
    adapt_target_acceptance: float = 0.25
    seed: int = 0
    a_update_every: int = 5
    a_step: float = 0.3
    adapt_decay: float = 0.6

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}")
        if self.thin < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin}")
        if not 0 < self.pcn_step <= 1:
            raise ValueError(f"pcn_step must lie in (0, 1], got {self.pcn_step}")
        if not 0 < self.adapt_target_acceptance < 1:
            raise ValueError("adapt_target_acceptance must lie in (0, 1)")
        if self.a_update_every < 1:
            raise ValueError("a_update_every must be >= 1")


@dataclass
class PosteriorDraws:
    grid: GridSpec
    kappa: float
    latent: np.ndarray  # (draws, nodes)
    intensity: np.ndarray  # (draws, nodes)
    log_likelihood_trace: np.ndarray
    acceptance_rate: float
    s_final: float
    a_draws: np.ndarray | None = None
    a_acceptance_rate: float | None = None
    accept_trace: np.ndarray = field(default=None, repr=False)
    runtime: float = 0.0

    def __len__(self):
        return len(self.latent)

    @property
    def latent_draws(self) -> list:
        return [LatentField(self.grid, row) for row in self.latent]

    @property
    def intensity_draws(self) -> list:
        floor = self.kappa if self.kappa > 0 else float(self.intensity.min())
        return [IntensityField(self.grid, row, floor) for row in self.intensity]


def _sufficient_loglik(data: Dataset, grid: GridSpec):
    counts = data.node_counts(grid).astype(float)
    n = data.n
    weights = grid.weights

    def loglik(lam: np.ndarray) -> float:
        return float(np.dot(counts, np.log(lam)) - n * (np.dot(weights, lam) - 1.0))

    return loglik


def _initial_latent(link: LinkSpec, data: Dataset, size: int) -> np.ndarray:
    lam_bar = float(np.mean(data.counts))
    lo, hi = link.kappa + 0.1 * link.g_star, link.kappa + 0.9 * link.g_star
    return np.full(size, float(link.inverse(min(max(lam_bar, lo), hi))))


def fit_posterior(
    prior: GpPriorSpec,
    link: LinkSpec,
    data: Dataset,
    cfg: McmcConfig,
    grid: GridSpec,
    log_likelihood_hook=None,
) -> PosteriorDraws:
    """Run one chain targeting the posterior of the intensity given ``data``.

    ``log_likelihood_hook``, if given, replaces the Poisson log-likelihood;
    it receives the node intensities and returns a float.
    """
    if not link.invertible:
        raise ValueError("posterior fitting needs an invertible link for initialisation")
    if data.dim != grid.dim:
        raise ValueError(f"dataset has dim {data.dim}, grid has dim {grid.dim}")
    prior.check_grid(grid)
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    loglik = log_likelihood_hook or _sufficient_loglik(data, grid)

    rescaled = prior.kind == "rescaled_field"
    update_a = rescaled and prior.fixed_a is None
    a = None
    if rescaled:
        a = prior.fixed_a if prior.fixed_a is not None else (prior.gamma_shape / prior.gamma_rate) ** (1 / grid.dim)
    op = latent_operator(prior, grid, a)

    w_init = _initial_latent(link, data, grid.size)
    z = np.linalg.lstsq(op, w_init, rcond=1e-8)[0]
    w = op @ z
    lam = link(w)
    ll = loglik(lam)
    if not math.isfinite(ll):
        raise ValueError("log-likelihood is not finite at the initial state")

    s = cfg.pcn_step
    log_s = math.log(s)
    log_a = math.log(a) if update_a else 0.0
    log_prior_a = log_rescaling_density(prior, grid.dim, log_a) if update_a else 0.0

    n_keep = -(-(cfg.iterations - cfg.burn_in) // cfg.thin)
    latent = np.empty((n_keep, grid.size))
    intensity = np.empty((n_keep, grid.size))
    ll_trace = np.empty(n_keep)
    a_trace = np.empty(n_keep) if rescaled else None
    accept_trace = np.zeros(cfg.iterations, dtype=bool)
    n_accept_post = 0
    n_a_prop = n_a_acc = 0
    k = 0

    for t in range(cfg.iterations):
        xi = rng.standard_normal(z.shape[0])
        z_prop = math.sqrt(1.0 - s * s) * z + s * xi
        w_prop = op @ z_prop
        lam_prop = link(w_prop)
        ll_prop = loglik(lam_prop)
        accepted = math.log(rng.random()) < ll_prop - ll
        if accepted:
            z, w, lam, ll = z_prop, w_prop, lam_prop, ll_prop
        accept_trace[t] = accepted

        if t < cfg.burn_in:
            # Robbins-Monro on log s; frozen once burn-in ends.
            log_s = min(0.0, log_s + (t + 1) ** -cfg.adapt_decay * (float(accepted) - cfg.adapt_target_acceptance))
            s = math.exp(log_s)
        elif accepted:
            n_accept_post += 1

        if update_a and (t + 1) % cfg.a_update_every == 0:
            log_a_prop = log_a + cfg.a_step * rng.standard_normal()
            op_prop = latent_operator(prior, grid, math.exp(log_a_prop))
            w_prop = op_prop @ z
            lam_prop = link(w_prop)
            ll_prop = loglik(lam_prop)
            log_prior_prop = log_rescaling_density(prior, grid.dim, log_a_prop)
            n_a_prop += 1
            if math.log(rng.random()) < ll_prop - ll + log_prior_prop - log_prior_a:
                log_a, log_prior_a, op = log_a_prop, log_prior_prop, op_prop
                w, lam, ll = w_prop, lam_prop, ll_prop
                n_a_acc += 1
            a = math.exp(log_a)

        if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            latent[k] = w
            intensity[k] = lam
            ll_trace[k] = ll
            if rescaled:
                a_trace[k] = a
            k += 1

    return PosteriorDraws(
        grid=grid,
        kappa=link.kappa,
        latent=latent,
        intensity=intensity,
        log_likelihood_trace=ll_trace,
        acceptance_rate=n_accept_post / (cfg.iterations - cfg.burn_in),
        s_final=s,
        a_draws=a_trace,
        a_acceptance_rate=(n_a_acc / n_a_prop) if n_a_prop else None,
        accept_trace=accept_trace,
        runtime=time.perf_counter() - started,
    )


@dataclass
class PosteriorSummary:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rho: np.ndarray | None = None
    median_rho: float | None = None
    mass_outside: dict = field(default_factory=dict)
    l2: np.ndarray | None = None
    median_l2: float | None = None


def posterior_summary(draws: PosteriorDraws, truth: IntensityField | None = None, radii=(), level=0.9):
    """Node-wise mean and central band; distances to ``truth`` when it is given.

    ``mass_outside[r]`` is the fraction of draws with Hellinger distance to
    the truth above ``r``.
    """
    lam = draws.intensity
    if len(lam) == 0:
        raise ValueError("no posterior draws to summarise")
    tail = (1.0 - level) / 2.0
    lower, upper = np.quantile(lam, [tail, 1.0 - tail], axis=0)
    summary = PosteriorSummary(mean=lam.mean(axis=0), lower=lower, upper=upper)
    if truth is not None:
        if truth.grid != draws.grid:
            raise ValueError("truth and draws live on different grids")
        rho = hellinger_to_many(truth, lam)
        l2 = np.sqrt((lam - truth.values) ** 2 @ truth.grid.weights)
        summary.rho = rho
        summary.median_rho = float(np.median(rho))
        summary.l2 = l2
        summary.median_l2 = float(np.median(l2))
        summary.mass_outside = {float(r): float(np.mean(rho > r)) for r in radii}
    return summary
