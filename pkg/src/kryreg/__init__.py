"""Krylov-subspace iterated Tikhonov regularization.

Matrix-free solvers for large linear discrete ill-posed problems: partial
Golub-Kahan bidiagonalization or the Arnoldi process reduce the problem to
a small subspace, iterated Tikhonov regularization runs on the reduced
factor, and the regularization parameter is the root of a monotone
discrepancy-type equation.  Synthetic deblurring/tomography problems and an
experiment harness (library, HTTP service and CLI) round out the package.
"""

from .decomp import (
    ArnoldiDecomposition,
    BidiagDecomposition,
    Breakdown,
    arnoldi_decompose,
    estimate_h_ell,
    golub_kahan_bidiagonalize,
)
from .dense import ShiftedNormalSolver, SmallSVD, solve_shifted_normal, svd_small
from .harness import (
    DiagRow,
    ExperimentConfig,
    ExperimentResult,
    ProblemSpec,
    RatePoint,
    RateStudyResult,
    ResultRow,
    diagnostics_sweep,
    fit_loglog_slope,
    rate_study,
    run_experiment,
)
from .operators import LinearOperator, NonSquareOperatorError, spectral_norm_estimate
from .params import (
    AlphaSelection,
    ParamStrategy,
    ProjectedData,
    compute_rhs,
    phi,
    phi_prime,
    project_data,
    select_alpha,
    solve_alpha,
)
from .problems import (
    DiagnosticReport,
    SourceCondition,
    TestProblem,
    add_noise,
    assumption_diagnostics,
    build_problem,
    gaussian_blur_1d,
    gaussian_blur_2d,
    make_source_solution,
    motion_blur_2d,
    tomography_parallel,
)
from .rng import RandomStream, derive_seed
from .solvers import (
    PowerConfig,
    RegularizationConfig,
    SolveReport,
    iat_solve,
    igkt_solve,
    iterated_tikhonov_full,
    prepare_subspace,
    reduced_iterated_tikhonov,
    solve_on_subspace,
)

__version__ = "0.1.0"
