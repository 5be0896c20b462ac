"""Natural-gradient metric applications for descent over densities.

Four preconditioners map a Euclidean gradient g to a descent direction:

- transport (Wasserstein-type): D^T diag(p) D g, sparse stencil work;
- Fisher-Rao: entrywise p * g;
- Mahalanobis: the Laplacian pseudo-inverse of g;
- combined: W diag(1/d) W^T g, where the diagonal d approximates the
  wavelet-transformed Hessian of the combined loss,
      d_i = alpha1 / (H1 p)_i + alpha2 / (H2 p)_i + alpha3 * h3_i.

H1 rows hold the squared entries of the differentiated basis columns, H2
rows the squared basis columns, and h3 the diagonal of the
wavelet-transformed Laplacian.  All three are assembled once per basis from
the sparse columns; each metric application is then two sparse matvecs plus
two O(total) transforms.

Division conventions for d: a term with alpha = 0 is skipped before any
division; alpha > 0 over an exactly zero row (the constant scaling column)
gives d = +inf, freezing that coefficient (1/inf = 0); a slot with d = 0
(possible only when alpha1 = alpha2 = 0 on the constant column, where
h3 = 0) is treated as pseudo-inverse, 1/0 := 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .grid import Density, Grid
from .operators import laplacian_pinv_apply
from .wavelets import (
    WaveletBasis,
    _column_window,
    _window_to_sparse,
    transform_forward,
    transform_inverse,
)

__all__ = [
    "MetricPrecomp",
    "MetricKind",
    "MetricInfeasibleError",
    "build_precomp",
    "apply_combined_metric",
    "apply_wasserstein_metric",
    "apply_fisher_rao_metric",
    "apply_mahalanobis_metric",
    "metric_apply_fn",
]


class MetricInfeasibleError(ValueError):
    """Raised when a metric requiring positivity sees a nonpositive density."""


class MetricKind(str, Enum):
    WASSERSTEIN = "wasserstein"
    FISHER_RAO = "fisher_rao"
    MAHALANOBIS = "mahalanobis"
    COMBINED = "combined"


@dataclass(frozen=True)
class MetricPrecomp:
    """Sparse Hessian-diagonal data for one (grid, basis) pair.

    H1 and H2 are CSR with rows indexed by wavelet index and columns by
    site, so the per-step products H1 @ p and H2 @ p are row-major matvecs.
    """

    basis: WaveletBasis
    h1: sp.csr_matrix
    h2: sp.csr_matrix
    h3: np.ndarray

    @property
    def nnz(self) -> tuple[int, int]:
        return (self.h1.nnz, self.h2.nnz)


def _sparse_diff(n: int, col) -> tuple[np.ndarray, np.ndarray]:
    """Forward difference of a sparse column, as (indices, values).

    Exploits that cascade columns occupy one circular window: rebuild the
    window, difference it with one zero pad on each side, and fold back.
    """
    start, vals = col
    if len(vals) >= n:
        dense = np.zeros(n)
        np.add.at(dense, (start + np.arange(len(vals))) % n, vals)
        dv = n * (np.roll(dense, -1) - dense)
        idx = np.nonzero(dv)[0]
        return idx, dv[idx]
    ext = np.concatenate([[0.0], vals, [0.0]])
    dv = n * (ext[1:] - ext[:-1])  # support starts one site left of the window
    folded = _window_to_sparse(n, start - 1, dv)
    return folded.indices, folded.values


def _assemble_1d(basis: WaveletBasis) -> tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray]:
    n = basis.grid.n
    rows_h1: list[np.ndarray] = []
    cols_h1: list[np.ndarray] = []
    vals_h1: list[np.ndarray] = []
    rows_h2: list[np.ndarray] = []
    cols_h2: list[np.ndarray] = []
    vals_h2: list[np.ndarray] = []
    h3 = np.zeros(n)
    for i in range(n):
        window = _column_window(basis, i)
        col = _window_to_sparse(n, *window)
        rows_h2.append(np.full(len(col.indices), i))
        cols_h2.append(col.indices)
        vals_h2.append(col.values**2)
        didx, dvals = _sparse_diff(n, window)
        rows_h1.append(np.full(len(didx), i))
        cols_h1.append(didx)
        vals_h1.append(dvals**2)
        h3[i] = float(np.sum(dvals**2))
    h1 = sp.coo_matrix(
        (np.concatenate(vals_h1), (np.concatenate(rows_h1), np.concatenate(cols_h1))),
        shape=(n, n),
    ).tocsr()
    h2 = sp.coo_matrix(
        (np.concatenate(vals_h2), (np.concatenate(rows_h2), np.concatenate(cols_h2))),
        shape=(n, n),
    ).tocsr()
    return h1, h2, h3


def build_precomp(basis: WaveletBasis, grid: Grid | None = None) -> MetricPrecomp:
    """Assemble H1, H2, h3 for a basis.

    1D: differentiate and square each sparse basis column.  2D: the tensor
    structure of the basis factors every column as an outer product, so the
    squared matrices are Kronecker products of the 1D ones:
    H2_2d = H2 x H2, H1_2d = H1 x H2 + H2 x H1, and h3 adds coordinatewise.
    """
    if grid is not None and grid != basis.grid:
        raise ValueError("grid does not match basis")
    grid = basis.grid
    h1_1d, h2_1d, h3_1d = _assemble_1d(basis)
    if grid.dim == 1:
        h1, h2, h3 = h1_1d, h2_1d, h3_1d
    else:
        h2 = sp.kron(h2_1d, h2_1d, format="csr")
        h1 = (sp.kron(h1_1d, h2_1d) + sp.kron(h2_1d, h1_1d)).tocsr()
        h3 = np.add.outer(h3_1d, h3_1d).ravel()
    h1.eliminate_zeros()
    h2.eliminate_zeros()
    return MetricPrecomp(basis=basis, h1=h1, h2=h2, h3=h3)


def _positive_values(p: Density | np.ndarray) -> np.ndarray:
    pv = p.values if isinstance(p, Density) else np.asarray(p, dtype=np.float64)
    if pv.min() <= 0.0:
        raise MetricInfeasibleError("metric requires a strictly positive density")
    return pv


def apply_combined_metric(
    pre: MetricPrecomp,
    alphas: tuple[float, float, float],
    p: Density | np.ndarray,
    g: np.ndarray,
) -> np.ndarray:
    """W diag(1/d) W^T g with the division conventions described above."""
    pv = _positive_values(p)
    a1, a2, a3 = alphas
    basis = pre.basis
    d = np.zeros(basis.grid.total)
    with np.errstate(divide="ignore"):
        if a1 > 0:
            d += a1 / (pre.h1 @ pv)
        if a2 > 0:
            d += a2 / (pre.h2 @ pv)
    if a3 > 0:
        d += a3 * pre.h3
    c = transform_forward(basis, g)
    with np.errstate(divide="ignore"):
        scale = np.where(d > 0.0, 1.0 / d, 0.0)  # d = +inf -> 0, d = 0 -> 0
    return transform_inverse(basis, scale * c)


def apply_wasserstein_metric(p: Density | np.ndarray, g: np.ndarray) -> np.ndarray:
    """sum_a D_a^T diag(p) D_a g: the transport preconditioner at p."""
    if not isinstance(p, Density):
        raise TypeError("p must be a Density (carries the grid)")
    grid = p.grid
    pv = _positive_values(p)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (grid.total,):
        raise ValueError(f"gradient shape {g.shape} does not match grid ({grid.total},)")
    x = g.reshape(grid.shape)
    px = pv.reshape(grid.shape)
    out = np.zeros_like(x)
    for axis in range(grid.dim):
        flux = px * (np.roll(x, -1, axis=axis) - x)
        out += np.roll(flux, 1, axis=axis) - flux
    return (grid.n**2 * out).reshape(grid.total)


def apply_fisher_rao_metric(p: Density | np.ndarray, g: np.ndarray) -> np.ndarray:
    """Entrywise diag(p) g."""
    pv = p.values if isinstance(p, Density) else np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != pv.shape:
        raise ValueError(f"gradient shape {g.shape} does not match density {pv.shape}")
    return pv * g


def apply_mahalanobis_metric(grid: Grid, g: np.ndarray) -> np.ndarray:
    """Laplacian pseudo-inverse of g; the constant component maps to zero."""
    return laplacian_pinv_apply(grid, g)


def metric_apply_fn(
    kind: MetricKind,
    grid: Grid,
    precomp: MetricPrecomp | None = None,
    alphas: tuple[float, float, float] | None = None,
) -> Callable[[Density, np.ndarray], np.ndarray]:
    """Bind a metric kind to a (density, gradient) -> direction callable."""
    kind = MetricKind(kind)
    if kind is MetricKind.COMBINED:
        if precomp is None or alphas is None:
            raise ValueError("combined metric requires a precomp and alphas")
        return lambda p, g: apply_combined_metric(precomp, alphas, p, g)
    if kind is MetricKind.WASSERSTEIN:
        return lambda p, g: apply_wasserstein_metric(p, g)
    if kind is MetricKind.FISHER_RAO:
        return lambda p, g: apply_fisher_rao_metric(p, g)
    return lambda p, g: apply_mahalanobis_metric(grid, g)
