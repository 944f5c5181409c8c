"""INI-style run configuration with sections grid, prior, link, mcmc and experiment."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .gp_prior import GpPriorSpec
from .grid import GridSpec, IntensityField, read_intensity_csv
from .link import LinkSpec
from .mcmc import McmcConfig

DEFAULT_N_GRID = (8, 16, 32, 64, 128, 256, 512)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TruthSpec:
    """Recipe for the true intensity: a named smooth function or a CSV file."""

    name: str = "sine"
    params: tuple = ()
    path: str | None = None

    def build(self, grid: GridSpec, kappa_floor: float) -> IntensityField:
        p = dict(self.params)
        x0 = grid.nodes[:, 0]
        if self.name == "csv":
            lam = read_intensity_csv(self.path, kappa_floor)
            if lam.grid != grid:
                raise ConfigError(f"truth CSV grid {lam.grid} does not match configured grid {grid}")
            return lam
        if self.name == "sine":
            values = p.get("offset", 2.0) + p.get("amplitude", 1.0) * np.sin(2 * np.pi * p.get("frequency", 1.0) * x0)
        elif self.name == "constant":
            values = np.full(grid.size, p.get("level", 2.0))
        elif self.name == "linear":
            values = p.get("intercept", 1.0) + p.get("slope", 1.0) * x0
        else:
            raise ConfigError(f"unknown truth recipe {self.name!r}")
        return IntensityField(grid, values, kappa_floor)


@dataclass(frozen=True)
class RateExperimentConfig:
    truth: TruthSpec = TruthSpec()
    n_grid: tuple = DEFAULT_N_GRID
    replicates_per_n: int = 4
    prior: GpPriorSpec = GpPriorSpec()
    link: LinkSpec = LinkSpec()
    mcmc: McmcConfig = McmcConfig()
    grid: GridSpec = GridSpec(1, 64)
    expected_exponent: float | None = None
    seed: int = 0
    radii: tuple = ()
    workers: int = 1

    def __post_init__(self):
        ns = list(self.n_grid)
        if len(ns) < 4:
            raise ConfigError(f"n_grid needs at least 4 sample sizes, got {ns}")
        if any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            raise ConfigError(f"n_grid must be strictly increasing positive integers, got {ns}")
        if self.replicates_per_n < 1:
            raise ConfigError("replicates_per_n must be >= 1")
        self.prior.check_grid(self.grid)

    @property
    def exponent(self) -> float:
        """Polynomial rate exponent: the configured one, else ``-beta / (2 beta + d)``."""
        if self.expected_exponent is not None:
            return self.expected_exponent
        beta = self.prior.hurst_beta
        return -beta / (2 * beta + self.grid.dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = self.grid.to_dict()
        d["truth"] = {"name": self.truth.name, "params": dict(self.truth.params), "path": self.truth.path}
        d["n_grid"] = list(self.n_grid)
        d["radii"] = list(self.radii)
        d.pop("workers")
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    for section in ("grid", "prior", "link", "mcmc", "experiment"):
        cp.add_section(section)
    return cp


def load_config(path=None, overrides=()) -> configparser.ConfigParser:
    """Read a config file and apply ``section.key=value`` overrides."""
    cp = _parser()
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file {path} does not exist")
        cp.read(path)
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())
    return cp


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _optional_float(raw: str):
    return None if raw.strip().lower() in ("", "none") else float(raw)


def _int_list(raw: str) -> tuple:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _float_list(raw: str) -> tuple:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def grid_from_config(cp) -> GridSpec:
    try:
        return GridSpec(_get(cp, "grid", "dim", int, 1), _get(cp, "grid", "points_per_axis", int, 64))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def prior_from_config(cp) -> GpPriorSpec:
    d = GpPriorSpec()
    try:
        return GpPriorSpec(
            kind=_get(cp, "prior", "kind", str, d.kind),
            hurst_beta=_get(cp, "prior", "beta", float, d.hurst_beta),
            base_kernel_scale=_get(cp, "prior", "base_kernel_scale", float, d.base_kernel_scale),
            gamma_shape=_get(cp, "prior", "gamma_shape", float, d.gamma_shape),
            gamma_rate=_get(cp, "prior", "gamma_rate", float, d.gamma_rate),
            integration_substeps=_get(cp, "prior", "integration_substeps", int, d.integration_substeps),
            fixed_a=_get(cp, "prior", "fixed_a", _optional_float, d.fixed_a),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def link_from_config(cp) -> LinkSpec:
    d = LinkSpec()
    try:
        return LinkSpec(
            kind=_get(cp, "link", "kind", str, d.kind),
            kappa=_get(cp, "link", "kappa", float, d.kappa),
            g_star=_get(cp, "link", "g_star", float, d.g_star),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def mcmc_from_config(cp, seed=None) -> McmcConfig:
    d = McmcConfig()
    try:
        return McmcConfig(
            iterations=_get(cp, "mcmc", "iterations", int, d.iterations),
            burn_in=_get(cp, "mcmc", "burn_in", int, d.burn_in),
            thin=_get(cp, "mcmc", "thin", int, d.thin),
            pcn_step=_get(cp, "mcmc", "pcn_step", float, d.pcn_step),
            adapt_target_acceptance=_get(cp, "mcmc", "adapt_target_acceptance", float, d.adapt_target_acceptance),
            seed=seed if seed is not None else _get(cp, "mcmc", "seed", int, d.seed),
            a_update_every=_get(cp, "mcmc", "a_update_every", int, d.a_update_every),
            a_step=_get(cp, "mcmc", "a_step", float, d.a_step),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def truth_from_config(cp) -> TruthSpec:
    name = _get(cp, "experiment", "truth", str, "sine")
    path = None
    if name.endswith(".csv"):
        name, path = "csv", _get(cp, "experiment", "truth", str, None)
    params = {}
    for key, value in cp.items("experiment"):
        if key.startswith("truth."):
            params[key[len("truth."):]] = float(value)
    return TruthSpec(name, tuple(sorted(params.items())), path)


def experiment_from_config(cp, seed=None) -> RateExperimentConfig:
    d = RateExperimentConfig()
    base_seed = seed if seed is not None else _get(cp, "experiment", "seed", int, d.seed)
    return RateExperimentConfig(
        truth=truth_from_config(cp),
        n_grid=_get(cp, "experiment", "n_grid", _int_list, d.n_grid),
        replicates_per_n=_get(cp, "experiment", "replicates_per_n", int, d.replicates_per_n),
        prior=prior_from_config(cp),
        link=link_from_config(cp),
        mcmc=mcmc_from_config(cp),
        grid=grid_from_config(cp),
        expected_exponent=_get(cp, "experiment", "expected_exponent", _optional_float, None),
        seed=base_seed,
        radii=_get(cp, "experiment", "radii", _float_list, ()),
        workers=_get(cp, "experiment", "workers", int, 1),
    )


def config_snapshot(cp) -> dict:
    return {s: dict(cp.items(s)) for s in cp.sections()}
