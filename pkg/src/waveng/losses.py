"""The three loss terms over densities and their alpha-weighted combination.

Terms: a weighted semi-H^{-1} transport surrogate (quadratic in p - mu with
the weighted elliptic pseudo-inverse as kernel), the Kullback-Leibler
divergence to mu (plain or mass-corrected), and the Dirichlet energy of
p - mu.  Infeasible densities (any site <= 0) evaluate to +inf so that a
backtracking line search can reject them uniformly instead of catching
exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grid import Density, Grid
from .operators import EllipticSolveConfig, laplacian_apply, weighted_elliptic_pinv_apply

__all__ = [
    "KLForm",
    "LossSpec",
    "LossEval",
    "e1_eval",
    "e2_eval",
    "e3_eval",
    "combined_eval",
]


class KLForm(str, Enum):
    PLAIN = "plain"
    MASS_CORRECTED = "mass_corrected"


@dataclass(frozen=True)
class LossSpec:
    """Coefficients and reference measure of the combined loss."""

    alpha1: float
    alpha2: float
    alpha3: float
    mu: Density
    kl_form: KLForm = KLForm.MASS_CORRECTED
    solve_config: EllipticSolveConfig = EllipticSolveConfig()

    def __post_init__(self) -> None:
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ValueError("alpha coefficients must be nonnegative")
        if max(self.alpha1, self.alpha2, self.alpha3) == 0:
            raise ValueError("at least one alpha must be positive")
        if self.mu.min <= 0:
            raise ValueError("reference measure must be strictly positive")

    @property
    def alphas(self) -> tuple[float, float, float]:
        return (self.alpha1, self.alpha2, self.alpha3)

    @property
    def grid(self) -> Grid:
        return self.mu.grid


@dataclass(frozen=True)
class LossEval:
    """Loss value and its Euclidean gradient (None when value is +inf)."""

    value: float
    gradient: np.ndarray | None

    @property
    def feasible(self) -> bool:
        return np.isfinite(self.value)


def _values(p: Density | np.ndarray) -> np.ndarray:
    return p.values if isinstance(p, Density) else np.asarray(p, dtype=np.float64)


def e1_eval(
    p: Density | np.ndarray, mu: Density, cfg: EllipticSolveConfig | None = None
) -> LossEval:
    """Transport surrogate: half the weighted semi-H^{-1} norm of p - mu.

    value = (p-mu)^T K (p-mu) / 2 and gradient = K (p-mu), where K is the
    pseudo-inverse of the mu-weighted elliptic operator.  The constant
    component of p - mu is annihilated by K and contributes nothing.
    """
    r = _values(p) - mu.values
    x = weighted_elliptic_pinv_apply(mu, r, cfg)
    return LossEval(value=0.5 * float(r @ x), gradient=x)


def e2_eval(
    p: Density | np.ndarray, mu: Density, form: KLForm = KLForm.MASS_CORRECTED
) -> LossEval:
    """KL divergence of p from mu.

    Plain form: sum p log(p/mu), gradient log(p/mu) + 1.  Mass-corrected
    form subtracts p - mu termwise, making mu the exact unconstrained
    minimizer; gradient log(p/mu).  Values agree whenever the masses agree.
    Any site with p <= 0 yields value +inf.
    """
    pv = _values(p)
    if pv.min() <= 0.0:
        return LossEval(value=np.inf, gradient=None)
    log_ratio = np.log(pv / mu.values)
    form = KLForm(form)
    if form is KLForm.PLAIN:
        return LossEval(value=float(pv @ log_ratio), gradient=log_ratio + 1.0)
    value = float(pv @ log_ratio) - float(pv.sum()) + float(mu.values.sum())
    return LossEval(value=value, gradient=log_ratio)


def e3_eval(p: Density | np.ndarray, mu: Density) -> LossEval:
    """Dirichlet energy of p - mu: value (p-mu)^T A (p-mu) / 2 with A = -Delta."""
    r = _values(p) - mu.values
    a = laplacian_apply(mu.grid, r)
    return LossEval(value=0.5 * float(r @ a), gradient=a)


def combined_eval(p: Density | np.ndarray, spec: LossSpec) -> LossEval:
    """Alpha-weighted sum of the three terms; zero-alpha terms never run."""
    value = 0.0
    gradient = np.zeros(spec.grid.total)
    if spec.alpha2 > 0:
        ev = e2_eval(p, spec.mu, spec.kl_form)
        if not ev.feasible:
            return LossEval(value=np.inf, gradient=None)
        value += spec.alpha2 * ev.value
        gradient += spec.alpha2 * ev.gradient
    if spec.alpha1 > 0:
        ev = e1_eval(p, spec.mu, spec.solve_config)
        value += spec.alpha1 * ev.value
        gradient += spec.alpha1 * ev.gradient
    if spec.alpha3 > 0:
        ev = e3_eval(p, spec.mu)
        value += spec.alpha3 * ev.value
        gradient += spec.alpha3 * ev.gradient
    return LossEval(value=value, gradient=gradient)
