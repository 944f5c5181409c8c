"""Simulation and likelihood of i.i.d. Poisson point process observations.

Intensities are read off the grid by nearest-node lookup, so every field is
treated as piecewise constant on the lattice cells. This makes simulation
and likelihood exact for the same model.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import IntensityField, integrate, make_grid

# Patterns are simulated in fixed-size blocks, each with its own RNG stream
# spawned from (seed, block index).
BLOCK_SIZE = 1024


@dataclass(frozen=True, eq=False)
class PointPattern:
    """One realisation: an ``(k, dim)`` array of points in the unit cube."""

    dim: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, self.dim)
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise ValueError("pattern has points outside [0, 1]^d")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Dataset:
    patterns: list
    seed_provenance: int | str = "external"
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.patterns) < 1:
            raise ValueError("a dataset needs at least one pattern")
        dims = {p.dim for p in self.patterns}
        if len(dims) != 1:
            raise ValueError(f"patterns have mixed dimensions {sorted(dims)}")
        flat = np.concatenate([p.points for p in self.patterns], axis=0)
        flat.setflags(write=False)
        object.__setattr__(self, "_flat", flat)

    @property
    def n(self) -> int:
        return len(self.patterns)

    @property
    def dim(self) -> int:
        return self.patterns[0].dim

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(p) for p in self.patterns], dtype=np.int64)

    @property
    def all_points(self) -> np.ndarray:
        """Every point of every pattern, stacked."""
        return self._flat

    def node_counts(self, grid) -> np.ndarray:
        """Total number of points falling in each grid cell, summed over patterns."""
        if grid.dim != self.dim:
            raise ValueError(f"dataset has dim {self.dim}, grid has dim {grid.dim}")
        return np.bincount(grid.locate(self._flat), minlength=grid.size)

    @classmethod
    def from_flat(cls, dim, counts, points, seed_provenance="external") -> "Dataset":
        splits = np.cumsum(counts)[:-1]
        chunks = np.split(np.asarray(points).reshape(-1, dim), splits)
        return cls([PointPattern(dim, c) for c in chunks], seed_provenance)


def _rejection_points(rng, values, grid, bound, total):
    """Draw ``total`` i.i.d. points with density proportional to the field."""
    dim = grid.dim
    mean_accept = float(np.dot(values, grid.weights)) / bound
    out = np.empty((0, dim))
    while len(out) < total:
        need = total - len(out)
        batch = int(need / mean_accept * 1.1) + 16
        cand = rng.random((batch, dim))
        keep = rng.random(batch) * bound < values[grid.locate(cand)]
        out = np.concatenate([out, cand[keep]], axis=0)
    return out[:total]


def simulate_flat(field: IntensityField, n: int, seed: int):
    """Simulate ``n`` patterns, returning ``(counts, stacked_points)``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    values = field.values
    if not np.all(np.isfinite(values)):
        raise ValueError("intensity field has non-finite values")
    grid = field.grid
    total_mass = integrate(field)
    bound = float(values.max())
    counts, points = [], []
    for block, start in enumerate(range(0, n, BLOCK_SIZE)):
        size = min(BLOCK_SIZE, n - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
        c = rng.poisson(total_mass, size=size)
        counts.append(c)
        points.append(_rejection_points(rng, values, grid, bound, int(c.sum())))
    return np.concatenate(counts), np.concatenate(points, axis=0)


def simulate_ppp(field: IntensityField, n: int, seed: int) -> Dataset:
    """Draw ``n`` independent realisations of the process with intensity ``field``.

    Each pattern has a Poisson(Lambda) number of points, placed i.i.d. with
    density ``field / Lambda`` by rejection from uniform proposals.
    """
    counts, points = simulate_flat(field, n, seed)
    return Dataset.from_flat(field.grid.dim, counts, points, seed_provenance=int(seed))


def per_pattern_log_ratio(field1, field2, counts, points) -> np.ndarray:
    """``log(p_1 / p_2)`` for each pattern in a flat simulation output."""
    grid = field1.grid
    log_ratio = np.log(field1.values) - np.log(field2.values)
    owner = np.repeat(np.arange(len(counts)), counts)
    per_point = log_ratio[grid.locate(points)] if len(points) else np.zeros(0)
    sums = np.bincount(owner, weights=per_point, minlength=len(counts))
    return sums - (integrate(field1) - integrate(field2))


def log_likelihood(field: IntensityField, data: Dataset) -> float:
    """Log of the product over patterns of ``p_lambda`` relative to the unit-rate process."""
    grid = field.grid
    if data.dim != grid.dim:
        raise ValueError(f"dataset has dim {data.dim}, field grid has dim {grid.dim}")
    at_points = field.values[grid.locate(data.all_points)]
    if at_points.size and at_points.min() < field.kappa_floor:
        raise ValueError("field is below its kappa floor at an observed point")
    return float(np.sum(np.log(at_points)) - data.n * (integrate(field) - 1.0))


def augment_with_standard_ppp(data: Dataset, kappa: float, seed: int) -> Dataset:
    """Superpose an independent ``PPP(kappa * mu)`` pattern onto each observation.

    The result is a sample from the process with intensity ``kappa + lambda_0``.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    background = IntensityField.constant(make_grid(data.dim, 2), kappa)
    extra = simulate_ppp(background, data.n, seed)
    patterns = [
        PointPattern(data.dim, np.concatenate([p.points, q.points], axis=0))
        for p, q in zip(data.patterns, extra.patterns)
    ]
    return Dataset(patterns, seed_provenance=data.seed_provenance)


# ---------------------------------------------------------------- I/O


def write_dataset(data: Dataset, out_dir) -> None:
    """Write ``patterns.csv`` plus a ``manifest.json`` with per-pattern counts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "patterns.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pattern_id"] + [f"x{k}" for k in range(data.dim)])
        for i, p in enumerate(data.patterns):
            for pt in p.points:
                writer.writerow([i] + [repr(float(c)) for c in pt])
    manifest = {
        "n": data.n,
        "dim": data.dim,
        "counts": data.counts.tolist(),
        "seed_provenance": data.seed_provenance,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    n, dim = int(manifest["n"]), int(manifest["dim"])
    buckets = [[] for _ in range(n)]
    with open(src / "patterns.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                buckets[int(row[0])].append([float(c) for c in row[1:]])
    patterns = [PointPattern(dim, np.array(b, dtype=float).reshape(-1, dim)) for b in buckets]
    counts = manifest.get("counts")
    if counts is not None and [len(p) for p in patterns] != list(counts):
        raise ValueError(f"{src}: pattern counts disagree with manifest")
    return Dataset(patterns, manifest.get("seed_provenance", "external"))
