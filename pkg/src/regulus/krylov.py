"""Projection methods on standard Krylov subspaces.

GMRES and LSQR (and their hybrid and "regularize at the end" variants)
share one driver: at iteration ``d`` the small least-squares problem
``min ||E_d t - ||b|| e_1||`` (``E_d`` the Hessenberg or lower bidiagonal
matrix) is solved through its SVD, with an optional Tikhonov term
``alpha ||t||^2``, and mapped back with the basis ``V_d``.  The history
residual is the projected residual, which equals ``||A x_d - b||`` while the
basis stays orthonormal.

All solvers take ``(A, b, cfg=None, **overrides)`` where ``overrides`` may
set any :class:`~regulus.results.IterConfig` field.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import Breakdown, DpInfeasibleError, ParameterError, ShapeError
from .factorizations import ArnoldiState, GolubKahanState
from .linop import aslinearoperator
from .regparam import ProjectedProblem, RegSelector, dp_newton_tikhonov, gcv_continuous
from .results import HistoryRecorder, IterConfig

__all__ = [
    "gmres",
    "lsqr",
    "cgls",
    "hybrid_gmres",
    "hybrid_lsqr",
    "arnoldi_tikhonov",
    "gk_tikhonov",
]

_CFG_FIELDS = {f.name for f in dataclasses.fields(IterConfig)}


def _prepare(A, b, cfg, overrides, square=False):
    A = aslinearoperator(A)
    m, n = A.shape
    if square and m != n:
        raise ShapeError(f"operator must be square, got {A.shape}")
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.shape[0] != m:
        raise ShapeError(f"b has length {b.shape[0]}, expected {m}")
    if not np.all(np.isfinite(b)):
        raise ParameterError("b has non-finite entries")
    bad = set(overrides) - _CFG_FIELDS
    if bad:
        raise TypeError(f"unexpected solver options {sorted(bad)}")
    cfg = IterConfig() if cfg is None else cfg
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return A, b, cfg


def _stopping_selector(sel, name):
    if sel is None:
        return None
    if sel.kind == "gcv":
        raise ParameterError(f"{name} is purely iterative: use a 'dp' or 'fixed' (iteration count) selector")
    if sel.kind == "dp":
        sel.require_delta()
    elif int(sel.value) != sel.value or sel.value < 1:
        raise ParameterError(f"{name}: fixed selector must be an iteration count >= 1")
    return sel


def _pick_alpha(problem, sel, alpha_prev):
    """Return ``(alpha, note)`` for one projected problem."""
    if sel.kind == "fixed":
        return float(sel.value), ""
    if sel.kind == "dp":
        try:
            return dp_newton_tikhonov(problem, sel.delta, sel.eta, full=True), ""
        except DpInfeasibleError as err:
            if alpha_prev is not None:
                return alpha_prev, f"dp infeasible ({err.side}); kept previous alpha"
            return gcv_continuous(problem, "full"), f"dp infeasible ({err.side}); used gcv"
    return gcv_continuous(problem, sel.variant or "full"), ""


def _krylov(A, b, cfg, overrides, process, mode, name, reorth=False):
    """Shared driver; ``mode`` is "plain", "hybrid" or "final"."""
    A, b, cfg = _prepare(A, b, cfg, overrides, square=(process == "arnoldi"))
    m, n = A.shape
    dmax = cfg.resolved_max_iters(m, n)
    sel = cfg.selector
    if mode == "plain":
        sel = _stopping_selector(sel, name)
        if sel is not None and sel.kind == "fixed":
            dmax = min(int(sel.value), m, n)
    else:
        sel = RegSelector.gcv("full") if sel is None else sel
        if sel.kind == "dp":
            sel.require_delta()
    if process == "arnoldi":
        state = ArnoldiState(A, b)
    else:
        state = GolubKahanState(A, b, reorth=reorth)
    beta = state.beta
    rec = HistoryRecorder(cfg.x_true, cfg.keep_iterates, cfg.callback)
    stop = "max_iters"
    alpha = None
    x = np.zeros(n)
    problem = None
    for d in range(1, dmax + 1):
        broke = False
        try:
            state.step()
        except Breakdown:
            broke = True
        E = state.H if process == "arnoldi" else state.B
        f = np.zeros(d + 1)
        f[0] = beta
        problem = ProjectedProblem.from_matrix(E, f, m, flavor="hybrid")
        note = ""
        if mode == "hybrid":
            alpha, note = _pick_alpha(problem, sel, alpha)
        else:
            alpha = 0.0
        x = state.V[:, :d] @ problem.solve(alpha)
        res = problem.residual_norm(alpha)
        rec.record(d, x, res, alpha if mode == "hybrid" else None, note)
        if broke:
            stop = "breakdown"
            break
        if sel is not None and sel.kind == "dp" and mode != "hybrid" and res <= sel.eta * sel.delta:
            stop = "dp_satisfied"
            break
    if mode == "final":
        # regularize only the last projected problem
        alpha, note = _pick_alpha(problem, sel, None)
        d = rec.history[-1].iteration
        x = state.V[:, :d] @ problem.solve(alpha)
        rec.history.pop()
        if rec.iterates is not None:
            rec.iterates.pop()
        rec.record(d, x, problem.residual_norm(alpha), alpha, note)
    info = {"iterations": len(rec.history)}
    if mode != "plain":
        info["alpha"] = alpha
    return rec.result(x, stop, **info)


def gmres(A, b, cfg=None, **overrides):
    """GMRES with ``x_0 = 0``.

    Stops at the first iterate whose residual is below ``eta*delta`` for a
    ``dp`` selector, after ``value`` iterations for a ``fixed`` selector, or
    at ``cfg.max_iters``.
    """
    return _krylov(A, b, cfg, overrides, "arnoldi", "plain", "gmres")


def lsqr(A, b, cfg=None, reorth=False, **overrides):
    """LSQR (Golub-Kahan based least squares) with ``x_0 = 0``; stopping as :func:`gmres`."""
    return _krylov(A, b, cfg, overrides, "gk", "plain", "lsqr", reorth)


def hybrid_gmres(A, b, cfg=None, **overrides):
    """GMRES with Tikhonov regularization of every projected problem.

    The parameter ``alpha_d`` is fixed, chosen by the discrepancy principle
    (falling back to the previous value, or GCV at ``d = 1``, when the
    projected discrepancy equation has no root) or by GCV (default, full
    variant).  Runs to ``cfg.max_iters``.
    """
    return _krylov(A, b, cfg, overrides, "arnoldi", "hybrid", "hybrid_gmres")


def hybrid_lsqr(A, b, cfg=None, reorth=False, **overrides):
    """LSQR with Tikhonov regularization of every projected problem (see :func:`hybrid_gmres`)."""
    return _krylov(A, b, cfg, overrides, "gk", "hybrid", "hybrid_lsqr", reorth)


def arnoldi_tikhonov(A, b, cfg=None, **overrides):
    """Arnoldi to ``d*`` (or the discrepancy crossing), then Tikhonov on the last projected problem."""
    return _krylov(A, b, cfg, overrides, "arnoldi", "final", "arnoldi_tikhonov")


def gk_tikhonov(A, b, cfg=None, reorth=False, **overrides):
    """Golub-Kahan counterpart of :func:`arnoldi_tikhonov`."""
    return _krylov(A, b, cfg, overrides, "gk", "final", "gk_tikhonov", reorth)


def cgls(A, b, cfg=None, damp=0.0, **overrides):
    """Conjugate gradients on the normal equations, ``x_0 = 0``.

    With ``damp = alpha > 0`` the iteration solves
    ``(A^T A + alpha I) x = A^T b``.  Stopping as :func:`gmres`; stagnation
    (``||A^T r - alpha x|| <= 1e-14 ||A^T b||``) ends the run with reason
    ``"breakdown"``.
    """
    A, b, cfg = _prepare(A, b, cfg, overrides)
    m, n = A.shape
    damp = float(damp)
    if damp < 0:
        raise ParameterError(f"damp must be >= 0, got {damp}")
    sel = _stopping_selector(cfg.selector, "cgls")
    dmax = cfg.resolved_max_iters(m, n)
    if sel is not None and sel.kind == "fixed":
        dmax = min(int(sel.value), m, n)
    x = np.zeros(n)
    r = b.copy()
    s = A.rmatvec(r)
    s0 = float(np.linalg.norm(s))
    if s0 == 0.0:
        raise ParameterError("cgls needs A^T b != 0")
    p = s.copy()
    gamma = s0 * s0
    rec = HistoryRecorder(cfg.x_true, cfg.keep_iterates, cfg.callback)
    stop = "max_iters"
    for d in range(1, dmax + 1):
        q = A.matvec(p)
        den = float(q @ q) + damp * float(p @ p)
        if den <= 0.0:
            stop = "breakdown"
            break
        a = gamma / den
        x += a * p
        r -= a * q
        s = A.rmatvec(r) - damp * x
        gnew = float(s @ s)
        rec.record(d, x, np.linalg.norm(r), damp if damp else None)
        if sel is not None and sel.kind == "dp" and np.linalg.norm(r) <= sel.eta * sel.delta:
            stop = "dp_satisfied"
            break
        if np.sqrt(gnew) <= 1e-14 * s0:
            stop = "breakdown"
            break
        p = s + (gnew / gamma) * p
        gamma = gnew
    return rec.result(x, stop, iterations=len(rec.history), damp=damp)
