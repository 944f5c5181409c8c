"""Gaussian latent priors on the grid.

Two families are supported:

``riemann_liouville``
    Random polynomial of degree ``floor(beta)`` plus the fractional integral
    ``int_0^x (x - y)^(beta - 1/2) dB_y`` of a Brownian motion, discretised
    with the left-point rule on a sub-grid. One-dimensional only.
``rescaled_field``
    Squared-exponential field evaluated at ``A x``, where ``A^d`` has a Gamma
    law, sampled through a jittered Cholesky factor of the Gram matrix.

Both are written as ``w = B z`` with ``z`` a standard normal vector, which is
the parametrisation the posterior sampler works in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .grid import GridSpec, LatentField
from .link import LinkSpec, apply_link

PRIOR_KINDS = ("riemann_liouville", "rescaled_field")

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class GpPriorSpec:
    kind: str = "riemann_liouville"
    hurst_beta: float = 1.0
    base_kernel_scale: float = 1.0
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    integration_substeps: int = 8
    # Pins the rescaling A instead of drawing it; used by tests and diagnostics.
    fixed_a: float | None = None

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {PRIOR_KINDS}")
        if not self.hurst_beta > 0:
            raise ValueError(f"hurst_beta must be positive, got {self.hurst_beta}")
        if not (self.gamma_shape > 0 and self.gamma_rate > 0):
            raise ValueError("gamma_shape and gamma_rate must be positive")
        if not self.base_kernel_scale > 0:
            raise ValueError("base_kernel_scale must be positive")
        if self.integration_substeps < 1:
            raise ValueError("integration_substeps must be >= 1")
        if self.fixed_a is not None and self.fixed_a < 0:
            raise ValueError("fixed_a must be >= 0")

    def check_grid(self, grid: GridSpec) -> None:
        if self.kind == "riemann_liouville" and grid.dim != 1:
            raise ValueError(f"the Riemann-Liouville prior needs a 1-d grid, got dim={grid.dim}")


# ------------------------------------------------------ Riemann-Liouville


def riemann_liouville_operator(x, beta: float, n_steps: int) -> np.ndarray:
    """Matrix mapping standard normals to ``W(x)`` at the points ``x``.

    The first ``floor(beta) + 1`` columns are the monomials ``x^k``; the rest
    carry the Brownian increments on ``n_steps`` equal sub-intervals of
    ``[0, 1]``, weighted by ``(x - y_j)^(beta - 1/2) sqrt(dt)`` for left
    endpoints ``y_j < x``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    degree = math.floor(beta)
    poly = x[:, None] ** np.arange(degree + 1)[None, :]
    dt = 1.0 / n_steps
    y = np.arange(n_steps) * dt
    lag = x[:, None] - y[None, :]
    active = lag > 0
    kernel = np.zeros_like(lag)
    kernel[active] = lag[active] ** (beta - 0.5)
    return np.hstack([poly, kernel * math.sqrt(dt)])


@lru_cache(maxsize=32)
def _rl_operator_for_grid(grid: GridSpec, beta: float, substeps: int) -> np.ndarray:
    op = riemann_liouville_operator(grid.nodes[:, 0], beta, substeps * grid.points_per_axis)
    op.setflags(write=False)
    return op


def sample_riemann_liouville(spec: GpPriorSpec, grid: GridSpec, seed: int) -> LatentField:
    if grid.dim != 1:
        raise ValueError(f"the Riemann-Liouville prior needs a 1-d grid, got dim={grid.dim}")
    op = _rl_operator_for_grid(grid, spec.hurst_beta, spec.integration_substeps)
    z = np.random.default_rng(seed).standard_normal(op.shape[1])
    return LatentField(grid, op @ z)


# --------------------------------------------------------- rescaled field


def squared_exponential_gram(nodes: np.ndarray, a: float, scale: float) -> np.ndarray:
    sq = np.sum((nodes[:, None, :] - nodes[None, :, :]) ** 2, axis=-1)
    return np.exp(-(a**2) * sq / scale**2)


def jittered_cholesky(gram: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``gram + jitter * I`` with bounded jitter escalation."""
    size = gram.shape[0]
    unit = np.trace(gram) / size
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(gram + jitter * unit * np.eye(size))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(f"Cholesky failed even with jitter {JITTER_MAX:g} * trace/size")


@lru_cache(maxsize=64)
def rescaled_field_factor(grid: GridSpec, a: float, scale: float) -> np.ndarray:
    """Cholesky factor of the rescaled squared-exponential Gram matrix on the grid."""
    factor = jittered_cholesky(squared_exponential_gram(grid.nodes, a, scale))
    factor.setflags(write=False)
    return factor


def draw_rescaling(spec: GpPriorSpec, dim: int, rng) -> float:
    """Draw ``A`` with ``A^dim ~ Gamma(shape, rate)``, unless it is pinned."""
    if spec.fixed_a is not None:
        return float(spec.fixed_a)
    return float(rng.gamma(spec.gamma_shape, 1.0 / spec.gamma_rate) ** (1.0 / dim))


def log_rescaling_density(spec: GpPriorSpec, dim: int, log_a: float) -> float:
    """Log density of ``log A`` when ``A^dim ~ Gamma(shape, rate)``."""
    t = math.exp(dim * log_a)
    return float(
        stats.gamma.logpdf(t, spec.gamma_shape, scale=1.0 / spec.gamma_rate) + math.log(dim) + dim * log_a
    )


def sample_rescaled_field(spec: GpPriorSpec, grid: GridSpec, seed: int) -> LatentField:
    rng = np.random.default_rng(seed)
    a = draw_rescaling(spec, grid.dim, rng)
    factor = rescaled_field_factor(grid, a, spec.base_kernel_scale)
    return LatentField(grid, factor @ rng.standard_normal(grid.size))


# ---------------------------------------------------------------- shared


def latent_operator(spec: GpPriorSpec, grid: GridSpec, a: float | None = None) -> np.ndarray:
    """Matrix ``B`` with ``w = B z`` for standard normal ``z`` (at rescaling ``a``)."""
    spec.check_grid(grid)
    if spec.kind == "riemann_liouville":
        return _rl_operator_for_grid(grid, spec.hurst_beta, spec.integration_substeps)
    if a is None:
        if spec.fixed_a is None:
            raise ValueError("rescaled_field operator needs a value of A")
        a = spec.fixed_a
    return rescaled_field_factor(grid, float(a), spec.base_kernel_scale)


def sample_latent(spec: GpPriorSpec, grid: GridSpec, seed: int) -> LatentField:
    spec.check_grid(grid)
    if spec.kind == "riemann_liouville":
        return sample_riemann_liouville(spec, grid, seed)
    return sample_rescaled_field(spec, grid, seed)


def prior_draw_intensity(prior: GpPriorSpec, link: LinkSpec, grid: GridSpec, seed: int):
    return apply_link(link, sample_latent(prior, grid, seed))
