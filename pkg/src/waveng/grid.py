"""Periodic uniform grids on [0,1]^d and probability densities over them.

Grids are 1D or 2D with n sites per direction (n a power of two, as the
wavelet layout requires).  A density is a nonnegative mass-per-site vector;
normalized densities sum to one.  Reference measures are Boltzmann weights
of a potential, exp(-V)/Z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "Density",
    "Potential",
    "make_grid",
    "site_coordinates",
    "reference_measure",
    "uniform_density",
]

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice: n sites per direction on [0,1]^dim."""

    dim: int
    n: int

    @property
    def total(self) -> int:
        return self.n**self.dim

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim


@dataclass(frozen=True)
class Density:
    """Mass-per-site vector over a grid; treat values as read-only."""

    grid: Grid
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.total,):
            raise ValueError(
                f"density has {values.shape} values, grid expects ({self.grid.total},)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        if self.normalized and abs(values.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError("density flagged normalized but does not sum to 1")

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def mass(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class Potential:
    """Potential V sampled at the grid sites."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.total,):
            raise ValueError(
                f"potential has {values.shape} values, grid expects ({self.grid.total},)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("potential values must be finite")


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def make_grid(dim: int, n: int) -> Grid:
    """Create a periodic grid; n must be a power of two, n >= 4."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if not isinstance(n, (int, np.integer)) or not _is_power_of_two(int(n)) or n < 4:
        raise ValueError(f"n must be a power of 2 with n >= 4, got {n}")
    return Grid(dim=int(dim), n=int(n))


def site_coordinates(grid: Grid) -> np.ndarray:
    """Site coordinates s/n, shape (dim, total), flattened row-major in 2D."""
    x = np.arange(grid.n, dtype=np.float64) / grid.n
    if grid.dim == 1:
        return x[np.newaxis, :]
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    return np.stack([x1.ravel(), x2.ravel()])


def boltzmann_weights(v: np.ndarray) -> np.ndarray:
    """Normalized exp(-v), max-shifted so large potentials cannot overflow."""
    v = np.asarray(v, dtype=np.float64)
    w = np.exp(-(v - v.min()))
    return w / w.sum()


def reference_measure(grid: Grid, potential: Potential) -> Density:
    """Reference density exp(-V)/Z on the grid; strictly positive, sums to 1."""
    if potential.grid != grid:
        raise ValueError("potential grid does not match")
    return Density(grid, boltzmann_weights(potential.values), normalized=True)


def uniform_density(grid: Grid) -> Density:
    """Uniform density, 1/total at every site."""
    return Density(grid, np.full(grid.total, 1.0 / grid.total), normalized=True)
