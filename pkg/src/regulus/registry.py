"""Solver catalogue used by the command-line runner.

Each entry adapts one solver to the common call
``entry.run(problem, params, selector)`` where ``problem`` is a
:class:`~regulus.testproblems.TestProblem`.
"""
from __future__ import annotations

from dataclasses import dataclass

from .direct import tgsvd_solve, tikhonov_solve, tsvd_solve
from .errors import ParameterError, ShapeError
from .gks import driver_anisoTV, driver_GS, driver_isoTV, gks, mmgks
from .krylov import arnoldi_tikhonov, cgls, gk_tikhonov, gmres, hybrid_gmres, hybrid_lsqr, lsqr
from .regparam import RegSelector
from .regularizers import (
    DerivativeOperator1D,
    SpaceTimeOperator,
    create_framelet_operator,
    spatial_derivative_operator,
)
from .results import IterConfig

__all__ = ["SolverEntry", "REGISTRY", "get_solver", "solver_names", "build_regularizer", "REGULARIZERS"]

REGULARIZERS = ("identity", "gradient", "spacetime", "framelet")


def build_regularizer(name, problem):
    """Regularization operator ``name`` matched to the problem's dimensions (``None`` = identity)."""
    dims = tuple(problem.dims)
    if name in (None, "identity"):
        return None
    if name == "gradient":
        if len(dims) == 1:
            return DerivativeOperator1D(dims[0])
        if len(dims) == 3:
            return SpaceTimeOperator(*dims)
        return spatial_derivative_operator(dims[0], dims[1])
    if name == "spacetime":
        nx, ny = (dims[0], 1) if len(dims) == 1 else dims[:2]
        nt = dims[2] if len(dims) == 3 else 1
        return SpaceTimeOperator(nx, ny, nt)
    if name == "framelet":
        if len(dims) == 3:
            raise ShapeError("the framelet regularizer is defined for static problems only")
        return create_framelet_operator(dims[0], dims[1] if len(dims) > 1 else 1)
    raise ParameterError(f"unknown regularizer {name!r}; expected one of {REGULARIZERS}")


def _volume_dims(problem):
    dims = tuple(problem.dims)
    if len(dims) == 1:
        return (dims[0], 1, 1)
    if len(dims) == 2:
        return dims + (1,)
    return dims


def _cfg(problem, params, selector, callback=None):
    return IterConfig(max_iters=params.get("max_iters"), selector=selector,
                      x_true=problem.x_true, keep_iterates=False, callback=callback)


def _run_tsvd(problem, params, selector, callback=None):
    return tsvd_solve(problem.A, problem.b, selector, problem.x_true)


def _run_tgsvd(problem, params, selector, callback=None):
    Psi = build_regularizer(params.get("regularizer", "gradient"), problem)
    Psi = Psi.to_dense() if Psi is not None else "identity"
    return tgsvd_solve(problem.A, problem.b, Psi, selector, problem.x_true)


def _run_tikhonov(problem, params, selector, callback=None):
    Psi = build_regularizer(params.get("regularizer", "identity"), problem)
    return tikhonov_solve(problem.A, problem.b, Psi, selector, problem.x_true)


def _iterative(fn, **fixed):
    def run(problem, params, selector, callback=None):
        extra = {k: params[k] for k in ("damp", "reorth") if k in params}
        extra.update(fixed)
        return fn(problem.A, problem.b, _cfg(problem, params, selector, callback), **extra)
    return run


def _run_gks(problem, params, selector, callback=None):
    Psi = build_regularizer(params.get("regularizer", "gradient"), problem)
    return gks(problem.A, problem.b, Psi, _cfg(problem, params, selector, callback), d0=params.get("d0", 2))


def _run_mmgks(problem, params, selector, callback=None):
    variant = params.get("variant", "plain")
    if variant == "plain":
        Psi = build_regularizer(params.get("regularizer", "gradient"), problem)
        dims = None
    else:
        Psi, dims = None, _volume_dims(problem)
    return mmgks(problem.A, problem.b, Psi, params.get("p", 2.0), params.get("q", 1.0),
                 params.get("eps", 1e-3), _cfg(problem, params, selector, callback), params.get("d0", 2),
                 variant, dims)


def _driver(fn):
    def run(problem, params, selector, callback=None):
        return fn(problem.A, problem.b, _volume_dims(problem), _cfg(problem, params, selector, callback),
                  eps=params.get("eps", 1e-3), d0=params.get("d0", 2))
    return run


@dataclass(frozen=True)
class SolverEntry:
    name: str
    description: str
    selectors: tuple
    run: object
    params: tuple = ()
    default_selector: str | None = None

    def make_selector(self, spec, delta):
        """Parse and validate a selector for this solver, filling ``delta`` for DP."""
        sel = RegSelector.parse(spec) if spec is not None else None
        if sel is None and self.default_selector is not None:
            sel = RegSelector.parse(self.default_selector)
        if sel is not None:
            if sel.kind not in self.selectors:
                raise ParameterError(f"solver {self.name} does not support the {sel.kind!r} selector")
            sel = sel.with_delta(delta)
        return sel


_ITER = ("max_iters",)
_GK = ("max_iters", "reorth")
_MM = ("max_iters", "regularizer", "p", "q", "eps", "d0", "variant")
_DRV = ("max_iters", "eps", "d0")

_ENTRIES = [
    SolverEntry("TSVD", "truncated SVD", ("fixed", "dp", "gcv"), _run_tsvd),
    SolverEntry("TGSVD", "truncated generalized SVD", ("fixed", "dp", "gcv"), _run_tgsvd, ("regularizer",)),
    SolverEntry("Tikhonov", "Tikhonov regularization (standard or general form)",
                ("fixed", "dp", "gcv"), _run_tikhonov, ("regularizer",)),
    SolverEntry("CGLS", "conjugate gradients for least squares", ("fixed", "dp"), _iterative(cgls),
                ("max_iters", "damp")),
    SolverEntry("GMRES", "generalized minimal residual", ("fixed", "dp"), _iterative(gmres), _ITER),
    SolverEntry("Hybrid_LSQR", "LSQR with Tikhonov on each projected problem", ("fixed", "dp", "gcv"),
                _iterative(hybrid_lsqr), _GK),
    SolverEntry("Hybrid_GMRES", "GMRES with Tikhonov on each projected problem", ("fixed", "dp", "gcv"),
                _iterative(hybrid_gmres), _ITER),
    SolverEntry("GK_Tikhonov", "Golub-Kahan projection, Tikhonov on the final projected problem",
                ("fixed", "dp", "gcv"), _iterative(gk_tikhonov), _GK),
    SolverEntry("A_Tikhonov", "Arnoldi projection, Tikhonov on the final projected problem",
                ("fixed", "dp", "gcv"), _iterative(arnoldi_tikhonov), _ITER),
    SolverEntry("GKS", "generalized Krylov subspace method for general-form Tikhonov",
                ("fixed", "dp", "gcv"), _run_gks, ("max_iters", "regularizer", "d0")),
    SolverEntry("MMGKS", "majorization-minimization GKS for lp-lq regularization",
                ("fixed", "dp", "gcv"), _run_mmgks, _MM),
    SolverEntry("AnisoTV", "MMGKS with anisotropic (space-time) total variation", ("fixed", "dp", "gcv"),
                _driver(driver_anisoTV), _DRV),
    SolverEntry("IsoTV", "MMGKS with isotropic TV in space, anisotropic in time", ("fixed", "dp", "gcv"),
                _driver(driver_isoTV), _DRV),
    SolverEntry("GS", "MMGKS with group sparsity of the gradient across time", ("fixed", "dp", "gcv"),
                _driver(driver_GS), _DRV),
]
# LSQR is also reachable by name for convenience but is not one of the catalogue rows.
_EXTRA = [SolverEntry("LSQR", "LSQR (Golub-Kahan least squares)", ("fixed", "dp"), _iterative(lsqr), _GK)]

REGISTRY = {e.name: e for e in _ENTRIES}
_LOOKUP = {e.name.lower(): e for e in _ENTRIES + _EXTRA}


def solver_names():
    return [e.name for e in _ENTRIES]


def get_solver(name):
    """Look a solver up by name, case-insensitively."""
    try:
        return _LOOKUP[str(name).lower()]
    except KeyError:
        raise ParameterError(f"unknown solver {name!r}") from None
