"""Discrepancies between laws of Poisson point processes with given intensities.

For intensities bounded away from zero the Hellinger distance, the
Kullback-Leibler divergence and the centred second moment ``V`` of the
log-likelihood ratio reduce to one-dimensional integrals against ``mu``.
Monte Carlo oracles over simulated patterns are provided to check those
reductions independently.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import IntensityField, LatentField, check_same_grid, l2_distance, sup_distance
from .link import LinkSpec, apply_link
from .point_process import per_pattern_log_ratio, simulate_flat

# Absolute slack allowed when comparing a divergence against its bound.
BOUND_ROUNDOFF = 1e-12


def _checked(l1: IntensityField, l2: IntensityField):
    grid = check_same_grid(l1, l2)
    if l1.values.min() <= 0 or l2.values.min() <= 0:
        raise ValueError("divergences need strictly positive intensities")
    return grid


def kl_divergence(l1: IntensityField, l2: IntensityField) -> float:
    """``KL(P_l1, P_l2) = int l1 log(l1/l2) dmu - int (l1 - l2) dmu``."""
    grid = _checked(l1, l2)
    a, b = l1.values, l2.values
    integrand = a * np.log(a / b) - (a - b)
    return float(np.dot(integrand, grid.weights))


def v_discrepancy(l1: IntensityField, l2: IntensityField) -> float:
    """Variance of the log-likelihood ratio under ``P_l1``: ``int l1 log^2(l1/l2) dmu``."""
    grid = _checked(l1, l2)
    a, b = l1.values, l2.values
    return float(np.dot(a * np.log(a / b) ** 2, grid.weights))


def hellinger_affinity(l1: IntensityField, l2: IntensityField) -> float:
    """``int sqrt(p_l1 p_l2) dP_sp = exp(-1/2 int (sqrt l1 - sqrt l2)^2 dmu)``."""
    grid = _checked(l1, l2)
    gap = np.dot((np.sqrt(l1.values) - np.sqrt(l2.values)) ** 2, grid.weights)
    return float(np.exp(-0.5 * gap))


def hellinger_to_many(truth: IntensityField, draws: np.ndarray) -> np.ndarray:
    """Hellinger distance from ``truth`` to each row of a ``(k, size)`` array of intensities."""
    gaps = (np.sqrt(np.asarray(draws)) - np.sqrt(truth.values)) ** 2 @ truth.grid.weights
    return np.sqrt(-2.0 * np.expm1(-0.5 * gaps))


def hellinger_distance(l1: IntensityField, l2: IntensityField) -> float:
    """Hellinger distance ``{int (sqrt p_l1 - sqrt p_l2)^2 dP_sp}^(1/2)``, in ``[0, sqrt 2]``."""
    grid = _checked(l1, l2)
    gap = np.dot((np.sqrt(l1.values) - np.sqrt(l2.values)) ** 2, grid.weights)
    return float(np.sqrt(-2.0 * np.expm1(-0.5 * gap)))


# ------------------------------------------------------ Monte Carlo oracles


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.stderr


def mc_log_ratio_oracle(l1, l2, n_patterns: int = 50_000, seed: int = 0):
    """Mean and variance of the per-pattern log-likelihood ratio under ``P_l1``.

    Returns ``(kl_estimate, v_estimate)`` as :class:`McEstimate` values.
    """
    _checked(l1, l2)
    counts, points = simulate_flat(l1, n_patterns, seed)
    llr = per_pattern_log_ratio(l1, l2, counts, points)
    n = len(llr)
    mean = float(np.mean(llr))
    centred = llr - mean
    var = float(np.mean(centred**2))
    fourth = float(np.mean(centred**4))
    kl = McEstimate(mean, float(np.std(llr, ddof=1) / np.sqrt(n)))
    v = McEstimate(var * n / (n - 1), float(np.sqrt(max(fourth - var**2, 0.0) / n)))
    return kl, v


def mc_affinity_oracle(l1, l2, n_patterns: int = 50_000, seed: int = 0) -> McEstimate:
    """Estimate ``E_sp[sqrt(p_l1 p_l2)]`` from patterns of the unit-rate process."""
    grid = _checked(l1, l2)
    unit = IntensityField.constant(grid, 1.0)
    counts, points = simulate_flat(unit, n_patterns, seed)
    half_log = 0.5 * (
        per_pattern_log_ratio(l1, unit, counts, points) + per_pattern_log_ratio(l2, unit, counts, points)
    )
    vals = np.exp(half_log)
    return McEstimate(float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(len(vals))))


# ---------------------------------------------------------------- reports


@dataclass
class DivergenceReport:
    hellinger: float
    kl: float
    v: float
    l2: float
    mc_kl_estimate: McEstimate | None = None
    mc_v_estimate: McEstimate | None = None
    mc_affinity_estimate: McEstimate | None = None
    affinity: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def divergence_report(l1, l2, mc_oracle: bool = False, n_patterns: int = 50_000, seed: int = 0):
    report = DivergenceReport(
        hellinger=hellinger_distance(l1, l2),
        kl=kl_divergence(l1, l2),
        v=v_discrepancy(l1, l2),
        l2=l2_distance(l1, l2),
        affinity=hellinger_affinity(l1, l2),
    )
    if mc_oracle:
        report.mc_kl_estimate, report.mc_v_estimate = mc_log_ratio_oracle(l1, l2, n_patterns, seed)
        report.mc_affinity_estimate = mc_affinity_oracle(l1, l2, n_patterns, seed + 1)
    return report


@dataclass
class Lemma1Report:
    sup_gap: float
    hellinger: float
    kl: float
    v: float
    hellinger_bound: float
    kl_bound: float
    v_bound: float
    hellinger_sq_le_kl: bool

    @property
    def margins(self) -> dict:
        return {
            "hellinger": self.hellinger_bound - self.hellinger,
            "kl": self.kl_bound - self.kl,
            "v": self.v_bound - self.v,
        }

    @property
    def relative_margins(self) -> dict:
        """Margin divided by bound; ``1.0`` for a zero bound that is met exactly."""
        out = {}
        for key, margin in self.margins.items():
            bound = getattr(self, f"{key}_bound")
            out[key] = margin / bound if bound > 0 else (1.0 if margin >= 0 else -np.inf)
        return out

    @property
    def violations(self) -> list:
        bad = [k for k, m in self.margins.items() if m < -BOUND_ROUNDOFF]
        if not self.hellinger_sq_le_kl:
            bad.append("hellinger_sq_le_kl")
        return bad

    @property
    def ok(self) -> bool:
        return not self.violations


def lemma1_bound_check(w: LatentField, v: LatentField, link: LinkSpec) -> Lemma1Report:
    """Compare the three divergences of ``g(w)`` and ``g(v)`` against their Lipschitz bounds."""
    if not link.kappa > 0:
        raise ValueError("the bounds need kappa > 0")
    l1, l2 = apply_link(link, w), apply_link(link, v)
    s = sup_distance(w, v)
    lip, kappa = link.lipschitz_constant, link.kappa
    h = hellinger_distance(l1, l2)
    kl = kl_divergence(l1, l2)
    vv = v_discrepancy(l1, l2)
    return Lemma1Report(
        sup_gap=s,
        hellinger=h,
        kl=kl,
        v=vv,
        hellinger_bound=lip / np.sqrt(kappa) * s,
        kl_bound=lip**2 / kappa * s**2,
        v_bound=lip**2 / kappa * s**2 * (1.0 + lip / kappa * s),
        hellinger_sq_le_kl=bool(h**2 <= kl + BOUND_ROUNDOFF),
    )

