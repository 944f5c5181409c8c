"""End-to-end acceptance criteria, each at its stated tolerance.

Every criterion appends one PASS/FAIL line to ``conftest.ACCEPTANCE_LINES``,
which is printed in the terminal summary. Criterion 9 reruns criteria 1-8
and compares their numerical outputs exactly.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from pppbayes.config import experiment_from_config, load_config
from pppbayes.divergence import (
    hellinger_affinity,
    hellinger_distance,
    kl_divergence,
    mc_affinity_oracle,
    mc_log_ratio_oracle,
    v_discrepancy,
)
from pppbayes.experiment import run_lemma1_sweep, run_rate_experiment
from pppbayes.gp_prior import GpPriorSpec, latent_operator, riemann_liouville_operator, squared_exponential_gram
from pppbayes.grid import IntensityField, make_grid
from pppbayes.link import LinkSpec
from pppbayes.mcmc import McmcConfig, fit_posterior
from pppbayes.point_process import Dataset, simulate_flat

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SEED = 20261015


def _record(number, title, passed, detail, started):
    line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail} ({time.perf_counter() - started:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


# ------------------------------------------------------------- criteria


def divergence_constants():
    g = make_grid(1, 16)
    l1, l2 = IntensityField.constant(g, 2.0), IntensityField.constant(g, 1.0)
    out = {"kl": kl_divergence(l1, l2), "v": v_discrepancy(l1, l2), "h": hellinger_distance(l1, l2)}
    target = {
        "kl": 2 * math.log(2) - 1,
        "v": 2 * math.log(2) ** 2,
        "h": math.sqrt(2 - 2 * math.exp(-((math.sqrt(2) - 1) ** 2) / 2)),
    }
    err = max(abs(out[k] - target[k]) for k in out)
    return out, err <= 1e-6, f"max |error| {err:.1e}, h = {out['h']:.6f}"


def _smooth_field(grid, rng):
    a, b, c = rng.uniform(1.5, 3.0), rng.uniform(0, 0.8), rng.uniform(-0.4, 0.4)
    f, phase = rng.integers(1, 4), rng.uniform(0, 2 * np.pi)
    x = grid.nodes[:, 0]
    return IntensityField(grid, a + b * np.sin(2 * np.pi * f * x + phase) + c * x, 0.1)


def oracle_equivalence():
    g = make_grid(1, 64)
    rng = np.random.default_rng(SEED)
    out, misses = [], []
    for i in range(20):
        l1, l2 = _smooth_field(g, rng), _smooth_field(g, rng)
        kl, v = mc_log_ratio_oracle(l1, l2, 50_000, seed=SEED + 2 * i)
        aff = mc_affinity_oracle(l1, l2, 50_000, seed=SEED + 2 * i + 1)
        exact = (kl_divergence(l1, l2), v_discrepancy(l1, l2), hellinger_affinity(l1, l2))
        z = [(est.value - e) / est.stderr for est, e in zip((kl, v, aff), exact)]
        out.append(z)
        misses += [f"pair {i} {name} z={zz:+.2f}" for name, zz in zip(("kl", "v", "affinity"), z) if abs(zz) > 3]
    out = np.array(out)
    detail = f"max |z| kl {np.abs(out[:, 0]).max():.2f}, v {np.abs(out[:, 1]).max():.2f}, affinity {np.abs(out[:, 2]).max():.2f}"
    if misses:
        detail += "; outside 3 SE: " + ", ".join(misses)
    return out, not misses, detail


def lemma_sweep():
    g = make_grid(1, 64)
    out = {}
    for kind in ("logistic_variant", "shifted_abs"):
        rep = run_lemma1_sweep(GpPriorSpec(), LinkSpec(kind, 0.1, 10.0), g, 1000, SEED)
        out[kind] = rep.to_dict()
    ok = all(r["violations"] == 0 and r["max_hellinger_sq_over_kl"] <= 1.0 for r in out.values())
    detail = ", ".join(
        f"{k}: {r['violations']} violations, min relative margin {min(r['min_relative_margin'].values()):.3f}"
        for k, r in out.items()
    )
    return out, ok, detail


def _poisson_chisquare(counts, mean):
    kmax = int(counts.max())
    edges = np.arange(kmax + 1)
    probs = stats.poisson.pmf(edges, mean)
    probs[-1] = stats.poisson.sf(kmax - 1, mean)
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected = probs * len(counts)
    # merge sparse tail bins so every expected count is at least 5
    while len(expected) > 2 and expected[-1] < 5:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected, observed = expected[:-1], observed[:-1]
    while len(expected) > 2 and expected[0] < 5:
        expected[1] += expected[0]
        observed[1] += observed[0]
        expected, observed = expected[1:], observed[1:]
    return stats.chisquare(observed, expected).pvalue


def simulator_law():
    g = make_grid(1, 64)
    fields = {
        "constant": (IntensityField.constant(g, 3.0), (1.5, 1.5)),
        "linear": (IntensityField.from_function(g, lambda x: 1.0 + x[:, 0], 0.5), (0.625, 0.875)),
    }
    out, ok, parts = {}, True, []
    for i, (name, (field, means)) in enumerate(fields.items()):
        counts, points = simulate_flat(field, 10_000, SEED + i)
        owner = np.repeat(np.arange(len(counts)), counts)
        upper = points[:, 0] >= 0.5
        cells = np.stack([np.bincount(owner[~upper], minlength=len(counts)),
                          np.bincount(owner[upper], minlength=len(counts))])
        pvals = [_poisson_chisquare(c, m) for c, m in zip(cells, means)]
        prod = (cells[0] - cells[0].mean()) * (cells[1] - cells[1].mean())
        z_cov = prod.mean() / (prod.std(ddof=1) / math.sqrt(len(prod)))
        out[name] = {"pvalues": pvals, "z_cov": float(z_cov)}
        ok &= min(pvals) > 0.01 and abs(z_cov) <= 3
        parts.append(f"{name}: min p {min(pvals):.3f}, cov z {z_cov:+.2f}")
    return out, ok, "; ".join(parts)


def _variance_z(samples, target):
    c = samples - samples.mean()
    var = float(np.mean(c**2))
    se = math.sqrt(max(np.mean(c**4) - var**2, 0.0) / len(samples))
    return (samples.var(ddof=1) - target) / se


def prior_samplers():
    rng = np.random.default_rng(SEED)
    out = {}
    for beta, x in ((0.5, 0.5), (1.5, 1.0)):
        op = riemann_liouville_operator([x], beta, 512)[:, math.floor(beta) + 1:]
        w = rng.standard_normal((20_000, op.shape[1])) @ op[0]
        out[f"rl_beta_{beta}"] = _variance_z(w, x ** (2 * beta) / (2 * beta))
    g = make_grid(1, 8)
    spec = GpPriorSpec(kind="rescaled_field", fixed_a=2.0, base_kernel_scale=1.0)
    draws = rng.standard_normal((20_000, g.size)) @ latent_operator(spec, g).T
    gram = squared_exponential_gram(g.nodes, 2.0, 1.0)
    prods = draws[:, :, None] * draws[:, None, :]
    z = (prods.mean(axis=0) - gram) / (prods.std(axis=0, ddof=1) / math.sqrt(len(draws)))
    out["rescaled_max_z"] = float(np.abs(z).max())
    ok = all(abs(v) <= 4 for v in out.values())
    detail = ", ".join(f"{k} z={v:+.2f}" for k, v in out.items())
    return out, ok, detail


def sampler_correctness():
    g = make_grid(1, 64)
    data = Dataset.from_flat(1, np.zeros(10, dtype=int), np.empty((0, 1)))
    probes = (3, 17, 31, 45, 60)
    out = {}
    for name, prior in (("riemann_liouville", GpPriorSpec()),
                        ("rescaled_field", GpPriorSpec(kind="rescaled_field", fixed_a=3.0))):
        cfg = McmcConfig(iterations=6000, burn_in=1000, thin=5, seed=SEED)
        draws = fit_posterior(prior, LinkSpec(), data, cfg, g, log_likelihood_hook=lambda lam: 0.0)
        sd = np.sqrt((latent_operator(prior, g) ** 2).sum(axis=1))
        out[name] = [float(stats.kstest(draws.latent[:, j] / sd[j], "norm").pvalue) for j in probes]
    low = min(min(p) for p in out.values())
    return out, low > 0.01, f"min KS p-value over 2 priors x 5 nodes {low:.3f}"


def _rate(config_name):
    cfg = experiment_from_config(load_config(CONFIGS / config_name))
    report = run_rate_experiment(cfg)
    return report.to_dict(include_runtime=False)


def rate_example1():
    rep = _rate("example1.ini")
    rho = rep["median_rho_by_n"]
    ok = -0.50 <= rep["slope"] <= -0.17 and rho["512"] < rho["8"] / 2
    detail = (f"slope {rep['slope']:.3f} +/- {rep['slope_stderr']:.3f} (expected {rep['expected_exponent']:.3f}), "
              f"median rho n=8 {rho['8']:.3f}, n=512 {rho['512']:.3f}")
    return rep, ok, detail


def rate_example2():
    rep = _rate("example2.ini")
    ok = -0.50 <= rep["slope"] <= -0.17
    detail = (f"slope {rep['slope']:.3f} +/- {rep['slope_stderr']:.3f} (expected {rep['expected_exponent']:.3f}); "
              f"(log n)^{rep['log_factor_exponent']:.3f} factor not separable at this n range")
    return rep, ok, detail


CRITERIA = {
    1: ("divergence closed forms", divergence_constants),
    2: ("oracle equivalence", oracle_equivalence),
    3: ("Lipschitz bound sweep", lemma_sweep),
    4: ("simulator law", simulator_law),
    5: ("prior samplers", prior_samplers),
    6: ("sampler correctness", sampler_correctness),
    7: ("contraction trend, Riemann-Liouville prior", rate_example1),
    8: ("contraction trend, rescaled field prior", rate_example2),
}

_results = {}


def _run(number):
    if number not in _results:
        title, fn = CRITERIA[number]
        started = time.perf_counter()
        out, ok, detail = fn()
        _record(number, title, ok, detail, started)
        _results[number] = (out, ok)
    return _results[number]


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    _, ok = _run(number)
    assert ok, ACCEPTANCE_LINES[-1] if ACCEPTANCE_LINES else number


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, default=lambda a: np.asarray(a).tolist())


def test_criterion_9_determinism():
    started = time.perf_counter()
    differing = []
    for number, (title, fn) in CRITERIA.items():
        first, _ = _run(number)
        again, _, _ = fn()
        if _canonical(first) != _canonical(again):
            differing.append(number)
    detail = "criteria 1-8 reproduce exactly" if not differing else f"outputs differ for {differing}"
    assert _record(9, "determinism", not differing, detail, started), detail
