"""Natural gradient descent for combined losses over periodic densities.

The combined preconditioner diagonalizes the loss Hessian approximately in
a compactly supported orthogonal wavelet basis; transport (Wasserstein),
Fisher-Rao, and Mahalanobis preconditioners are provided as baselines.
"""

from .grid import Density, Grid, Potential, make_grid, reference_measure, uniform_density
from .losses import KLForm, LossEval, LossSpec, combined_eval, e1_eval, e2_eval, e3_eval
from .metrics import (
    MetricKind,
    MetricPrecomp,
    apply_combined_metric,
    apply_fisher_rao_metric,
    apply_mahalanobis_metric,
    apply_wasserstein_metric,
    build_precomp,
    metric_apply_fn,
)
from .operators import (
    EllipticSolveConfig,
    EllipticSolveError,
    diff_apply,
    diff_operator,
    laplacian_apply,
    laplacian_pinv_apply,
    weighted_elliptic_pinv_apply,
)
from .optimizer import DescentConfig, DescentHistory, armijo_step, run_descent
from .wavelets import (
    FilterPair,
    WaveletBasis,
    basis_column,
    daubechies_filters,
    dwt2_forward,
    dwt2_inverse,
    dwt_forward,
    dwt_inverse,
    make_basis,
)

__version__ = "0.1.0"
