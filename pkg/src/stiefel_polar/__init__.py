"""Polar-update block orthogonal iteration on products of complex Stiefel
manifolds, for tensor diagonalization and compression."""

from .tensors import (
    mode_product,
    unfold,
    refold,
    diag_of,
    make_diagonal,
    symmetrize,
    is_symmetric,
    random_tensor,
    inner_re,
)
from .stiefel import (
    polar_decompose,
    tangent_project,
    riemannian_gradient,
    weingarten_apply,
    random_stiefel,
    truncated_identity,
)
from .objectives import (
    DiagonalObjective,
    SymmetricDiagonalObjective,
    CompressionObjective,
    riemannian_hessian_apply,
    hessian_rank,
    homogeneity_residual,
    convexity_certificate,
)
from .solvers import (
    SolverConfig,
    SolveResult,
    NumericFailure,
    estimate_shift,
    apdoi_run,
    pdoi_run,
    hooi_run,
    solve,
    lroat,
    hopm,
    s_lroat,
    s_hopm,
    lmpd,
    lmpd_s,
)
from .diagnostics import (
    TraceRecord,
    assert_monotone,
    sufficient_increase_report,
    fit_rate,
    fd_gradient_check,
    seminondegeneracy_report,
)

__version__ = "0.1.0"
