"""Generalized Krylov subspace methods.

:func:`gks` solves general-form Tikhonov problems on a subspace that grows
by the normalised normal-equations residual at every iteration.
:func:`mmgks` applies the same machinery to the smoothed ``lp``-``lq``
functional

    J(x) = (1/p) sum_i ((Ax - b)_i**2 + eps**2)**(p/2)
         + (alpha/q) sum_g (||(Psi x)_g||**2 + eps**2)**(q/2),

where each majorization-minimization step reweights and takes one GKS
step.  ``g`` runs over single rows of ``Psi`` (anisotropic) or over groups
of rows (isotropic TV, group sparsity).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Breakdown, DpInfeasibleError, ParameterError, ShapeError
from .factorizations import GolubKahanState, qr_append_column, qr_skinny
from .linop import IdentityOperator, StackedOperator, KronOperator, aslinearoperator
from .regparam import ProjectedProblem, RegSelector, dp_newton_tikhonov, gcv_continuous
from .regularizers import DerivativeOperator1D, SpaceTimeOperator, spatial_derivative_operator
from .results import HistoryRecorder, IterConfig
from .krylov import _prepare

__all__ = [
    "MmWeights",
    "mm_weights",
    "mm_objective",
    "gks",
    "mmgks",
    "isotv_operator",
    "isotv_groups",
    "gs_operator",
    "gs_groups",
    "driver_anisoTV",
    "driver_isoTV",
    "driver_GS",
    "EPS_DEFAULT",
]

EPS_DEFAULT = 1e-3
CONV_TOL = 1e-12


@dataclass(frozen=True)
class MmWeights:
    """Square-root MM weights for the fidelity and regularization terms."""

    fid: np.ndarray
    reg: np.ndarray
    eps: float
    p: float
    q: float


def _check_pq(p, q, eps):
    if not (0 < p <= 2 and 0 < q <= 2):
        raise ParameterError(f"need 0 < p, q <= 2, got p={p}, q={q}")
    if (p <= 1 or q <= 1) and not eps > 0:
        raise ParameterError(f"eps must be > 0 when p <= 1 or q <= 1, got {eps}")
    if eps < 0:
        raise ParameterError(f"eps must be >= 0, got {eps}")


def _group_sq(v, groups):
    """Per-row squared group magnitude ``sum_{j in g(i)} v_j**2``."""
    v2 = v * v
    if groups is None:
        return v2
    return np.bincount(groups, weights=v2)[groups]


def _weight(mag2, r, eps):
    if r == 2:
        return np.ones_like(mag2)
    base = mag2 + eps * eps
    base = np.maximum(base, np.finfo(float).tiny)
    return base ** ((r - 2) / 4.0)


def mm_weights(residual, psix, p, q, eps=EPS_DEFAULT, groups=None):
    """MM weights ``(r_j**2 + eps**2)**((p-2)/4)`` and ``((Psi x)_j**2 + eps**2)**((q-2)/4)``.

    Parameters
    ----------
    residual : (m,) ndarray
        ``A x - b``.
    psix : (k,) ndarray
        ``Psi x``.
    p, q : float
        Exponents in ``(0, 2]``.
    eps : float
        Smoothing; must be positive if ``p <= 1`` or ``q <= 1``.
    groups : (k,) int ndarray, optional
        Group label of each row of ``Psi``; rows sharing a label share the
        weight computed from the group's Euclidean norm.
    """
    _check_pq(p, q, eps)
    r = np.asarray(residual, dtype=np.float64)
    v = np.asarray(psix, dtype=np.float64)
    return MmWeights(_weight(r * r, p, eps), _weight(_group_sq(v, groups), q, eps), float(eps), p, q)


def mm_objective(A, b, Psi, x, alpha, p, q, eps=EPS_DEFAULT, groups=None):
    """Smoothed objective ``J`` (module docstring) that the MM iteration decreases."""
    A, Psi = aslinearoperator(A), aslinearoperator(Psi)
    r = A.matvec(x) - np.asarray(b, dtype=np.float64)
    v = Psi.matvec(x)
    fid = np.sum((r * r + eps * eps) ** (p / 2.0)) / p
    if groups is None:
        mags = v * v
    else:
        mags = np.bincount(groups, weights=v * v)
    reg = np.sum((mags + eps * eps) ** (q / 2.0)) / q
    return float(fid + alpha * reg)


def _initial_basis(A, b, d0):
    if int(d0) < 1:
        raise ParameterError(f"initial dimension must be >= 1, got {d0}")
    st = GolubKahanState(A, b)
    for _ in range(int(d0) - 1):
        try:
            st.step()
        except Breakdown:
            break
    V = st.V
    V = V[:, np.linalg.norm(V, axis=0) > 0]
    Q, _ = np.linalg.qr(V)
    return Q


def _orthonormalize(V, r):
    """Two passes of modified Gram-Schmidt against the columns of ``V``."""
    w = r.copy()
    for _ in range(2):
        for j in range(V.shape[1]):
            w -= (V[:, j] @ w) * V[:, j]
    return w


def _rfactor(M):
    """Triangular (or trapezoidal, for wide ``M``) QR factor."""
    return np.linalg.qr(M, mode="r")


def _choose_alpha(problem, sel, alpha_prev):
    if sel.kind == "fixed":
        return float(sel.value), ""
    if sel.kind == "dp":
        try:
            return dp_newton_tikhonov(problem, sel.delta, sel.eta, full=True), ""
        except DpInfeasibleError as err:
            if err.side == "lower":
                # the subspace cannot fit the data to eta*delta yet; the expansion
                # depends on alpha, so regularizing here would stall the growth
                return 0.0, "dp infeasible (lower); used alpha=0"
            if alpha_prev is not None:
                return alpha_prev, f"dp infeasible ({err.side}); kept previous alpha"
            return gcv_continuous(problem, "projected"), f"dp infeasible ({err.side}); used gcv"
    return gcv_continuous(problem, sel.variant or "projected"), ""


class _Basis:
    """Growing orthonormal basis with cached ``A V`` and ``Psi V``."""

    def __init__(self, A, Psi, V):
        self.A, self.Psi = A, Psi
        self.V = V
        self.AV = A.matmat(V)
        self.PV = Psi.matmat(V)

    @property
    def d(self):
        return self.V.shape[1]

    def expand(self, r, tol):
        w = _orthonormalize(self.V, r)
        nw = np.linalg.norm(w)
        if nw <= tol:
            return None
        v = w / nw
        self.V = np.column_stack([self.V, v])
        av, pv = self.A.matvec(v), self.Psi.matvec(v)
        self.AV = np.column_stack([self.AV, av])
        self.PV = np.column_stack([self.PV, pv])
        return v, av, pv


def _setup_selector(cfg, default):
    sel = cfg.selector if cfg.selector is not None else default
    if sel.kind == "dp":
        sel.require_delta()
    return sel


def gks(A, b, Psi=None, cfg=None, d0=2, **overrides):
    """Generalized Krylov subspace method for ``min ||Ax-b||^2 + alpha ||Psi x||^2``.

    Parameters
    ----------
    A : LinearOperator or array_like, shape (m, n)
    b : (m,) array_like
    Psi : LinearOperator or array_like, shape (k, n), optional
        Identity when omitted.
    cfg : IterConfig, optional
        ``selector`` defaults to projected GCV.
    d0 : int
        Golub-Kahan steps used for the initial subspace.

    Returns
    -------
    SolveResult
        ``info["alpha"]`` is the last parameter, ``info["dim"]`` the final
        subspace dimension.

    Notes
    -----
    Iteration ``l`` solves the projected problem on a subspace of dimension
    ``d0 + l - 1`` and then expands it with the normal-equations residual
    ``A^T (A x - b) + alpha Psi^T Psi x``.  The run ends when that residual
    drops below ``1e-12 ||A^T b||`` or after ``max_iters`` iterations.
    """
    A, b, cfg = _prepare(A, b, cfg, overrides)
    m, n = A.shape
    Psi = IdentityOperator(n) if Psi is None else aslinearoperator(Psi)
    if Psi.shape[1] != n:
        raise ShapeError(f"Psi has {Psi.shape[1]} columns, expected {n}")
    sel = _setup_selector(cfg, RegSelector.gcv("projected"))
    dmax = cfg.resolved_max_iters(m, n)
    Atb = A.rmatvec(b)
    tol = CONV_TOL * np.linalg.norm(Atb)
    basis = _Basis(A, Psi, _initial_basis(A, b, d0))
    QA, RA = qr_skinny(basis.AV)
    QP, RP = qr_skinny(basis.PV) if basis.d <= Psi.shape[0] else (None, _rfactor(basis.PV))
    bb = float(b @ b)
    rec = HistoryRecorder(cfg.x_true, cfg.keep_iterates, cfg.callback)
    alpha = None
    stop = "max_iters"
    x = np.zeros(n)
    for it in range(1, dmax + 1):
        f = QA.T @ b
        problem = ProjectedProblem.from_matrix(RA, f, m, flavor="gks", L=RP,
                                               outside_res2=bb - float(f @ f))
        alpha, note = _choose_alpha(problem, sel, alpha)
        t = problem.solve(alpha)
        x = basis.V @ t
        Axb = basis.AV @ t - b
        rec.record(it, x, np.linalg.norm(Axb), alpha, note)
        if it == dmax:
            break
        r = A.rmatvec(Axb) + alpha * Psi.rmatvec(basis.PV @ t)
        if np.linalg.norm(r) <= tol or basis.d >= n:
            stop = "converged"
            break
        new = basis.expand(r, tol)
        if new is None:
            stop = "converged"
            break
        _, av, pv = new
        QA, RA = qr_append_column(QA, RA, av)
        if QP is not None and basis.d <= Psi.shape[0]:
            QP, RP = qr_append_column(QP, RP, pv)
        else:
            QP, RP = None, _rfactor(basis.PV)
    return rec.result(x, stop, alpha=alpha, dim=basis.d, iterations=len(rec.history))


def isotv_operator(nx, ny, nt=1):
    """Regularization operator for isotropic-in-space TV.

    For a 2-D image this stacks ``[I_nt kron I_ny kron Dx; I_nt kron Dy kron I_nx]``
    with square difference matrices (zero last row) so both blocks are
    indexed by pixel, followed by the time differences ``Dt kron I_ns`` when
    ``nt > 1``.  For signals (``ny == 1``) the plain space-time operator is
    returned, since isotropic and anisotropic TV coincide in 1-D.
    """
    nx, ny, nt = int(nx), int(ny), int(nt)
    if ny == 1 or nx == 1:
        return SpaceTimeOperator(max(nx, ny), 1, nt)
    if nx != ny:
        raise ShapeError(f"isotropic TV requires a square image, got {nx}x{ny}")
    ns = nx * ny
    Dx = DerivativeOperator1D(nx, square=True)
    Dy = DerivativeOperator1D(ny, square=True)
    It = IdentityOperator(nt)
    blocks = [
        KronOperator(It, KronOperator(IdentityOperator(ny), Dx)),
        KronOperator(It, KronOperator(Dy, IdentityOperator(nx))),
    ]
    if nt > 1:
        blocks.append(KronOperator(DerivativeOperator1D(nt), IdentityOperator(ns)))
    return StackedOperator(blocks)


def isotv_groups(nx, ny, nt=1):
    """Group labels for :func:`isotv_operator`: spatial pairs share, time rows are single."""
    nx, ny, nt = int(nx), int(ny), int(nt)
    if ny == 1 or nx == 1:
        return None
    if nx != ny:
        raise ShapeError(f"isotropic TV requires a square image, got {nx}x{ny}")
    ns = nx * ny
    pix = np.arange(nt * ns)
    time_rows = np.arange((nt - 1) * ns) + nt * ns
    return np.concatenate([pix, pix, time_rows])


def gs_operator(nx, ny, nt):
    """``I_nt kron Psi_s`` with ``Psi_s`` the spatial gradient."""
    return KronOperator(IdentityOperator(int(nt)), spatial_derivative_operator(nx, ny))


def gs_groups(nx, ny, nt):
    """Group labels for :func:`gs_operator`: one group per spatial gradient row across time."""
    rs = spatial_derivative_operator(nx, ny).shape[0]
    return np.tile(np.arange(rs), int(nt))


def _variant_groups(variant, dims, Psi, n):
    if variant in ("plain", "aniso", "anisoTV"):
        return Psi, None
    if dims is None or len(dims) != 3:
        raise ShapeError(f"variant {variant!r} needs dims=(nx, ny, nt)")
    nx, ny, nt = (int(v) for v in dims)
    if nx * ny * nt != n:
        raise ShapeError(f"dims {dims} do not match operator width {n}")
    if variant in ("isoTV", "iso"):
        op, groups = isotv_operator(nx, ny, nt), isotv_groups(nx, ny, nt)
    elif variant in ("GS", "gs"):
        op, groups = gs_operator(nx, ny, nt), gs_groups(nx, ny, nt)
    else:
        raise ParameterError(f"unknown MMGKS variant {variant!r}")
    if Psi is not None and Psi.shape != op.shape:
        raise ShapeError(f"Psi has shape {Psi.shape}; variant {variant!r} expects {op.shape}")
    return (op if Psi is None else Psi), groups


def mmgks(A, b, Psi=None, p=2.0, q=1.0, eps=EPS_DEFAULT, cfg=None, d0=2, variant="plain",
          dims=None, **overrides):
    """Majorization-minimization GKS for the smoothed ``lp``-``lq`` problem.

    Parameters
    ----------
    A, b, cfg, d0
        As in :func:`gks`.
    Psi : LinearOperator, optional
        Regularization operator; identity when omitted (``variant="plain"``),
        built from ``dims`` for ``"isoTV"`` and ``"GS"``.
    p, q : float
        Exponents in ``(0, 2]``.
    eps : float
        Smoothing parameter.
    variant : {"plain", "isoTV", "GS"}
        Weight grouping; see :func:`isotv_operator` and :func:`gs_operator`.
    dims : tuple of int, optional
        ``(nx, ny, nt)``; required by the grouped variants.

    Notes
    -----
    The first weights are evaluated at ``x = 0``.  Every iteration solves the
    weighted problem ``min ||W_f (A x - b)||^2 + alpha ||W_r Psi x||^2`` on
    the current subspace (QR factors of ``W_f A V`` and ``W_r Psi V`` are
    recomputed because the weights change), updates the weights at the new
    iterate and expands the subspace with the weighted normal-equations
    residual ``A^T W_f^2 (A x - b) + alpha Psi^T W_r^2 Psi x``.
    """
    A, b, cfg = _prepare(A, b, cfg, overrides)
    m, n = A.shape
    _check_pq(p, q, eps)
    Psi = None if Psi is None else aslinearoperator(Psi)
    Psi, groups = _variant_groups(variant, dims, Psi, n)
    if Psi is None:
        Psi = IdentityOperator(n)
    if Psi.shape[1] != n:
        raise ShapeError(f"Psi has {Psi.shape[1]} columns, expected {n}")
    sel = _setup_selector(cfg, RegSelector.gcv("projected"))
    dmax = cfg.resolved_max_iters(m, n)
    tol = CONV_TOL * np.linalg.norm(A.rmatvec(b))
    basis = _Basis(A, Psi, _initial_basis(A, b, d0))
    w = mm_weights(-b, np.zeros(Psi.shape[0]), p, q, eps, groups)
    rec = HistoryRecorder(cfg.x_true, cfg.keep_iterates, cfg.callback)
    alpha = None
    stop = "max_iters"
    x = np.zeros(n)
    for it in range(1, dmax + 1):
        QA, RA = qr_skinny(w.fid[:, None] * basis.AV)
        RP = _rfactor(w.reg[:, None] * basis.PV)
        wb = w.fid * b
        f = QA.T @ wb
        problem = ProjectedProblem.from_matrix(RA, f, m, flavor="gks", L=RP,
                                               outside_res2=float(wb @ wb) - float(f @ f))
        alpha, note = _choose_alpha(problem, sel, alpha)
        t = problem.solve(alpha)
        x = basis.V @ t
        Axb = basis.AV @ t - b
        Px = basis.PV @ t
        rec.record(it, x, np.linalg.norm(Axb), alpha, note)
        if it == dmax:
            break
        w = mm_weights(Axb, Px, p, q, eps, groups)
        r = A.rmatvec(w.fid**2 * Axb) + alpha * Psi.rmatvec(w.reg**2 * Px)
        if np.linalg.norm(r) <= tol or basis.d >= n:
            stop = "converged"
            break
        if basis.expand(r, tol) is None:
            stop = "converged"
            break
    return rec.result(x, stop, alpha=alpha, dim=basis.d, iterations=len(rec.history),
                      variant=variant)


def _dims(dims, n):
    dims = tuple(int(v) for v in dims)
    if len(dims) == 2:
        dims = dims + (1,)
    if len(dims) != 3 or min(dims) < 1:
        raise ShapeError(f"dims must be (nx, ny, nt), got {dims}")
    if dims[0] * dims[1] * dims[2] != n:
        raise ShapeError(f"dims {dims} do not match operator width {n}")
    return dims


def driver_anisoTV(A, b, dims, cfg=None, eps=EPS_DEFAULT, d0=2, **overrides):
    """MMGKS with ``p=2, q=1`` and anisotropic space-time TV (per-entry weights)."""
    A = aslinearoperator(A)
    nx, ny, nt = _dims(dims, A.shape[1])
    Psi = SpaceTimeOperator(nx, ny, nt)
    return mmgks(A, b, Psi, 2.0, 1.0, eps, cfg, d0, "plain", **overrides)


def driver_isoTV(A, b, dims, cfg=None, eps=EPS_DEFAULT, d0=2, **overrides):
    """MMGKS with ``p=2, q=1``, isotropic TV in space and anisotropic TV in time."""
    A = aslinearoperator(A)
    dims = _dims(dims, A.shape[1])
    return mmgks(A, b, None, 2.0, 1.0, eps, cfg, d0, "isoTV", dims, **overrides)


def driver_GS(A, b, dims, cfg=None, eps=EPS_DEFAULT, d0=2, **overrides):
    """MMGKS with ``p=2, q=1`` and group sparsity of the spatial gradient across time."""
    A = aslinearoperator(A)
    dims = _dims(dims, A.shape[1])
    return mmgks(A, b, None, 2.0, 1.0, eps, cfg, d0, "GS", dims, **overrides)
