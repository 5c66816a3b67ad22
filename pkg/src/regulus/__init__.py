"""Regularization methods for linear discrete ill-posed inverse problems.

Direct filtering (TSVD, TGSVD, Tikhonov), Krylov projection and hybrid
methods, generalized Krylov and majorization-minimization solvers for
lp-lq penalties, parameter-choice rules and synthetic test problems.
"""
from .direct import (FilterSpec, filter_factors, std_form_transform, tgsvd_solve, tikhonov_solve,
                     tsvd_solve)
from .errors import (Breakdown, DpInfeasibleError, InputError, ParameterError, PreconditionError,
                     RankDeficiencyError, RegulusError, ShapeError)
from .factorizations import (ArnoldiState, GolubKahanState, arnoldi_step, golub_kahan_step, gsvd,
                             svd)
from .gks import driver_anisoTV, driver_GS, driver_isoTV, gks, mm_objective, mm_weights, mmgks
from .krylov import (arnoldi_tikhonov, cgls, gk_tikhonov, gmres, hybrid_gmres, hybrid_lsqr, lsqr)
from .linop import (BlockDiagOperator, ComposedOperator, DiagonalOperator, IdentityOperator,
                    KronOperator, LinearOperator, MatrixOperator, StackedOperator,
                    aslinearoperator)
from .regparam import (ProjectedProblem, RegSelector, dp_discrete, dp_newton_tikhonov,
                       gcv_continuous, gcv_discrete_tsvd, gcv_function)
from .regularizers import (FrameletOperator, create_framelet_operator,
                           gen_first_derivative_operator, gen_first_derivative_operator_2D,
                           gen_spacetime_derivative_operator)
from .results import IterConfig, IterRecord, SolveResult

__version__ = "0.1.0"
