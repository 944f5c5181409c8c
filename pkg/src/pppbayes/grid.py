"""Regular midpoint grids on the unit cube and fields defined on them.

The dominating measure is the uniform probability measure on ``[0, 1]^d``.
Every function on the cube is represented by its values at the cell
centres of a regular lattice, and every ``dmu`` integral is the midpoint
rule on that lattice.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_NODES = 2**22


class GridMismatchError(ValueError):
    """Raised when two fields that must share a grid do not."""


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred lattice with ``points_per_axis ** dim`` nodes.

    Nodes are ordered C-style: the last coordinate varies fastest.
    """

    dim: int
    points_per_axis: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.points_per_axis < 2:
            raise ValueError(f"points_per_axis must be >= 2, got {self.points_per_axis}")
        if self.dim * np.log2(self.points_per_axis) > np.log2(MAX_NODES) + 1e-12:
            raise ValueError(
                f"grid with {self.points_per_axis}^{self.dim} nodes exceeds the limit of {MAX_NODES}"
            )
        m = self.points_per_axis
        axis = (np.arange(m) + 0.5) / m
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        nodes = np.stack([c.ravel() for c in mesh], axis=1)
        weights = np.full(m**self.dim, 1.0 / m**self.dim)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    def locate(self, points) -> np.ndarray:
        """Flat index of the node whose cell contains each point."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        m = self.points_per_axis
        idx = np.clip(np.floor(pts * m).astype(np.int64), 0, m - 1)
        flat = np.zeros(len(pts), dtype=np.int64)
        for k in range(self.dim):
            flat = flat * m + idx[:, k]
        return flat

    def to_dict(self) -> dict:
        return {"dim": self.dim, "points_per_axis": self.points_per_axis}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(int(d["dim"]), int(d["points_per_axis"]))


def make_grid(dim: int, points_per_axis: int) -> GridSpec:
    return GridSpec(dim, points_per_axis)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LatentField:
    """A realisation of the latent Gaussian process on the grid nodes."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        if values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("latent field has non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class IntensityField:
    """An intensity function, bounded below by ``kappa_floor`` on every node."""

    grid: GridSpec
    values: np.ndarray
    kappa_floor: float

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        if values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("intensity field has non-finite values")
        if not self.kappa_floor > 0:
            raise ValueError(f"kappa_floor must be positive, got {self.kappa_floor}")
        low = int(np.argmin(values))
        if values[low] < self.kappa_floor:
            raise ValueError(
                f"intensity {values[low]!r} at node {low} is below kappa_floor {self.kappa_floor!r}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, fn, kappa_floor: float) -> "IntensityField":
        """Evaluate ``fn`` on the ``(size, dim)`` node array."""
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float).reshape(-1), kappa_floor)

    @classmethod
    def constant(cls, grid: GridSpec, level: float, kappa_floor: float | None = None):
        return cls(grid, np.full(grid.size, float(level)), level if kappa_floor is None else kappa_floor)


def integrate(f: IntensityField | LatentField) -> float:
    """Midpoint-rule integral of a field against the uniform measure."""
    return float(np.dot(f.values, f.grid.weights))


def check_same_grid(*fields) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"fields live on different grids: {grid} vs {f.grid}")
    return grid


def sup_distance(f1, f2) -> float:
    """Max-over-nodes approximation of the uniform distance."""
    check_same_grid(f1, f2)
    return float(np.max(np.abs(f1.values - f2.values)))


def l2_distance(f1, f2) -> float:
    """``L_2(mu)`` distance between two fields on the same grid."""
    grid = check_same_grid(f1, f2)
    return float(np.sqrt(np.dot((f1.values - f2.values) ** 2, grid.weights)))


# ---------------------------------------------------------------- I/O


def write_grid_json(grid: GridSpec, path) -> None:
    Path(path).write_text(json.dumps(grid.to_dict()))


def read_grid_json(path) -> GridSpec:
    return GridSpec.from_dict(json.loads(Path(path).read_text()))


def write_field_csv(f, path) -> None:
    """One row per node: coordinates then value."""
    grid = f.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(grid.dim)] + ["value"])
        for node, value in zip(grid.nodes, f.values):
            writer.writerow([repr(float(c)) for c in node] + [repr(float(value))])


def read_field_csv(path) -> tuple[GridSpec, np.ndarray]:
    """Read a field CSV, reconstructing and validating its grid."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    dim = len(header) - 1
    if dim < 1 or header[-1] != "value":
        raise ValueError(f"{path}: malformed header {header}")
    data = np.array(body, dtype=float)
    m = int(round(len(data) ** (1.0 / dim)))
    grid = GridSpec(dim, m)
    if grid.size != len(data) or not np.allclose(data[:, :dim], grid.nodes, atol=1e-9):
        raise ValueError(f"{path}: node coordinates do not form a regular cell-centred grid")
    return grid, data[:, dim]


def read_intensity_csv(path, kappa_floor: float | None = None) -> IntensityField:
    grid, values = read_field_csv(path)
    return IntensityField(grid, values, float(values.min()) if kappa_floor is None else kappa_floor)
