"""Filtering methods for small dense problems: TSVD, Tikhonov, TGSVD.

All solvers return a :class:`~regulus.results.SolveResult` with a single
history row whose ``regparam`` is the chosen truncation index or Tikhonov
parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DpInfeasibleError, ParameterError, PreconditionError, RankDeficiencyError, ShapeError
from .factorizations import gsvd, svd
from .linop import IdentityOperator, LinearOperator
from .regparam import (
    ProjectedProblem,
    RegSelector,
    dp_newton_tikhonov,
    gcv_continuous,
    gcv_discrete_tsvd,
)
from .results import HistoryRecorder

__all__ = [
    "FilterSpec",
    "StdFormTransform",
    "filter_factors",
    "tsvd_solve",
    "tikhonov_solve",
    "tgsvd_solve",
    "std_form_transform",
]

RANK_TOL = 1e-14
DIRECT_MAX_DIM = 2048


@dataclass(frozen=True)
class FilterSpec:
    """Spectral filter: ``kind`` is ``"tsvd"`` (``param = h``) or ``"tikhonov"`` (``param = alpha``).

    For ``basis="svd"`` singular values are expected in descending order and
    TSVD keeps the first ``h``; for ``basis="gsvd"`` generalized values are
    expected in ascending order and TSVD keeps the last ``h``.
    """

    kind: str
    param: float
    basis: str = "svd"


def filter_factors(spec, svals):
    """Filter factors ``phi_i`` in ``[0, 1]`` for the given spectral values."""
    s = np.asarray(svals, dtype=np.float64).ravel()
    if np.any(s < 0):
        raise ParameterError("spectral values must be nonnegative")
    if spec.basis not in ("svd", "gsvd"):
        raise ParameterError(f"unknown basis {spec.basis!r}")
    if spec.kind == "tikhonov":
        a = float(spec.param)
        if not a > 0:
            raise ParameterError(f"Tikhonov parameter must be > 0, got {a}")
        return s**2 / (s**2 + a)
    if spec.kind == "tsvd":
        h = int(spec.param)
        if h != spec.param or not 0 <= h <= s.size:
            raise ParameterError(f"truncation index must be an integer in [0, {s.size}]")
        phi = np.zeros(s.size)
        if spec.basis == "svd":
            phi[:h] = 1.0
        elif h:
            phi[-h:] = 1.0
        return phi
    raise ParameterError(f"unknown filter kind {spec.kind!r}")


def _dense_matrix(A, name="A"):
    if isinstance(A, LinearOperator):
        m, n = A.shape
        if min(m, n) > DIRECT_MAX_DIM:
            raise ShapeError(f"{name} of shape {A.shape} is too large for a direct solver")
        return A.to_dense()
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be 2-D")
    if min(M.shape) > DIRECT_MAX_DIM:
        raise ShapeError(f"{name} of shape {M.shape} is too large for a direct solver")
    return M


def _row_compress(P):
    """Replace a tall ``Psi`` (more rows than columns) by ``S_r V_r^T``.

    Both give the same ``||Psi x||`` for every ``x``, so Tikhonov and TGSVD
    solutions are unchanged, while the compressed factor has full row rank
    ``r <= n`` as the GSVD requires.  Short ``Psi`` is returned as is.
    """
    k, n = P.shape
    if k <= n:
        return P
    _, s, Vt = np.linalg.svd(P, full_matrices=False)
    r = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    return s[:r, None] * Vt[:r]


def _is_identity(Psi):
    return Psi is None or isinstance(Psi, IdentityOperator) or (isinstance(Psi, str) and Psi == "identity")


def _selector(selector, default="gcv"):
    if selector is None:
        return RegSelector(default)
    return RegSelector.parse(selector)


def _vector(b, m):
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.shape[0] != m:
        raise ShapeError(f"b has length {b.shape[0]}, expected {m}")
    if not np.all(np.isfinite(b)):
        raise ParameterError("b has non-finite entries")
    return b


def _choose_truncation(res2, sel, valid, gcv_den, what):
    """Pick ``h`` from squared residuals ``res2[h]`` (index = h) by DP or GCV."""
    hs = [h for h in range(1, len(res2)) if valid(h)]
    if not hs:
        raise RankDeficiencyError(f"{what}: no admissible truncation index")
    if sel.kind == "dp":
        tau = sel.require_delta()
        if tau >= math.sqrt(res2[0]):
            raise DpInfeasibleError(f"{what}: eta*delta exceeds ||b||", side="upper")
        for h in hs:
            if math.sqrt(res2[h]) <= tau:
                return h
        raise DpInfeasibleError(f"{what}: no truncation reaches eta*delta", side="lower")
    best, best_h = math.inf, hs[0]
    for h in hs:
        den = gcv_den(h)
        if den <= 0:
            continue
        G = res2[h] / den
        if G < best:
            best, best_h = G, h
    return best_h


def tsvd_solve(A, b, selector=None, x_true=None):
    """Truncated SVD solution ``sum_{i<=h} (u_i^T b / s_i) v_i``.

    Parameters
    ----------
    A : (m, n) array_like or LinearOperator, ``m >= n``
    b : (m,) array_like
    selector : RegSelector, optional
        ``fixed`` (value = h), ``dp`` or ``gcv`` (default).
    x_true : ndarray, optional

    Returns
    -------
    SolveResult
        ``info["h"]`` holds the truncation index.
    """
    A = _dense_matrix(A)
    m, n = A.shape
    if m < n:
        raise ShapeError(f"tsvd_solve needs m >= n, got {A.shape}")
    b = _vector(b, m)
    sel = _selector(selector)
    sv = svd(A)
    beta = sv.U.T @ b
    outside = max(float(b @ b) - float(beta @ beta), 0.0)
    s1 = sv.s[0]
    rank = int(np.sum(sv.s > RANK_TOL * s1)) if s1 > 0 else 0
    if sel.kind == "fixed":
        h = int(sel.value)
        if h != sel.value or not 0 <= h <= n:
            raise ParameterError(f"truncation index must be an integer in [0, {n}]")
        if h > rank:
            raise RankDeficiencyError(f"s_{h} <= {RANK_TOL:g} * s_1: truncation beyond numerical rank")
    elif sel.kind == "gcv":
        h = gcv_discrete_tsvd(sv, b, m)
    else:
        tail = np.concatenate([np.cumsum((beta**2)[::-1])[::-1], [0.0]]) + outside
        h = _choose_truncation(tail, sel, lambda h: h <= rank, lambda h: (m - h) ** 2, "TSVD")
    coef = np.zeros(n)
    coef[:h] = beta[:h] / sv.s[:h]
    x = sv.V @ coef
    rec = HistoryRecorder(x_true)
    rec.record(1, x, np.linalg.norm(A @ x - b), h)
    return rec.result(x, "direct", h=h, selector=sel.kind, singular_values=sv.s)


def tikhonov_solve(A, b, Psi=None, selector=None, x_true=None):
    """Tikhonov solution of ``min ||A x - b||^2 + alpha ||Psi x||^2``.

    Standard form (``Psi=None``) uses the SVD of ``A``; general form uses the
    GSVD of ``(A, Psi)`` and includes the unfiltered null-space component.

    Parameters
    ----------
    A : (m, n) array_like or LinearOperator
    b : (m,) array_like
    Psi : (k, n) array_like or LinearOperator, optional
    selector : RegSelector, optional
        ``fixed`` (value = alpha > 0), ``dp`` or ``gcv`` (default, ``zeta = m``).

    Returns
    -------
    SolveResult
        ``info["alpha"]`` holds the parameter used.
    """
    A = _dense_matrix(A)
    m, n = A.shape
    b = _vector(b, m)
    sel = _selector(selector)
    if _is_identity(Psi):
        problem = ProjectedProblem.from_svd(svd(A), b)
    else:
        problem = ProjectedProblem.from_gsvd(gsvd(A, _row_compress(_dense_matrix(Psi, "Psi"))), b)
    if sel.kind == "fixed":
        alpha = float(sel.value)
        if not alpha > 0:
            raise ParameterError(f"Tikhonov parameter must be > 0, got {alpha}")
    elif sel.kind == "dp":
        alpha = dp_newton_tikhonov(problem, sel.require_delta() / sel.eta, sel.eta)
    else:
        alpha = gcv_continuous(problem, "full")
    x = problem.solve(alpha)
    rec = HistoryRecorder(x_true)
    rec.record(1, x, np.linalg.norm(A @ x - b), alpha)
    return rec.result(x, "direct", alpha=alpha, selector=sel.kind)


def tgsvd_solve(A, b, Psi, selector=None, x_true=None):
    """Truncated GSVD solution keeping the ``h`` largest generalized values.

    The components outside the range of ``Psi^T`` are never filtered.  GCV
    uses the denominator ``(m - (n - k) - h)**2``.
    """
    A = _dense_matrix(A)
    m, n = A.shape
    b = _vector(b, m)
    P = np.eye(n) if _is_identity(Psi) else _row_compress(_dense_matrix(Psi, "Psi"))
    sel = _selector(selector)
    g = gsvd(A, P)
    k = g.k
    fhat = g.U.T @ b
    outside = max(float(b @ b) - float(fhat @ fhat), 0.0)
    cmax = float(g.c.max())
    # res2[h]: residual with the h largest generalized values kept
    head = fhat[:k] ** 2
    res2 = np.array([float(head[: k - h].sum()) + outside for h in range(k + 1)])

    def admissible(h):
        return g.c[k - h] > RANK_TOL * cmax

    if sel.kind == "fixed":
        h = int(sel.value)
        if h != sel.value or not 0 <= h <= k:
            raise ParameterError(f"truncation index must be an integer in [0, {k}]")
        if h and not admissible(h):
            raise RankDeficiencyError(f"generalized value {k - h} is below the rank threshold")
    else:
        h = _choose_truncation(res2, sel, admissible, lambda h: float(m - (n - k) - h) ** 2, "TGSVD")
    coef = np.zeros(n)
    coef[k - h:k] = fhat[k - h:k] / g.c[k - h:k]
    coef[k:] = fhat[k:]
    x = g.Yinv_T @ coef
    rec = HistoryRecorder(x_true)
    rec.record(1, x, np.linalg.norm(A @ x - b), h)
    return rec.result(x, "direct", h=h, selector=sel.kind)


@dataclass(frozen=True)
class StdFormTransform:
    """Standard-form transformation of a general-form Tikhonov problem.

    Attributes
    ----------
    Psi_A_pinv : (n, k) ndarray
        A-weighted generalized pseudoinverse of ``Psi``.
    W : (n, l) ndarray
        Orthonormal basis of ``null(Psi)``.
    A_bar : (m, k) ndarray
        ``A @ Psi_A_pinv``.
    x0 : (n,) ndarray or None
        Null-space component ``W (A W)^+ b``.
    b_bar : (m,) ndarray or None
        ``b - A x0``.
    """

    Psi_A_pinv: np.ndarray
    W: np.ndarray
    A_bar: np.ndarray
    x0: np.ndarray | None = None
    b_bar: np.ndarray | None = None

    def to_general(self, xbar):
        """Map a standard-form solution back to the original variables."""
        x = self.Psi_A_pinv @ np.asarray(xbar, dtype=np.float64)
        return x if self.x0 is None else x + self.x0


def std_form_transform(A, Psi, b=None):
    """Build the standard-form transformation; pass ``b`` to get ``x0`` and ``b_bar``."""
    A = _dense_matrix(A)
    P = _dense_matrix(Psi, "Psi")
    m, n = A.shape
    if P.shape[1] != n:
        raise ShapeError(f"Psi has {P.shape[1]} columns, expected {n}")
    U, s, Vt = np.linalg.svd(P, full_matrices=True)
    r = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
    W = Vt[r:].T
    Psi_pinv = Vt[:r].T @ (U[:, :r] / s[:r]).T
    if W.shape[1]:
        AW = A @ W
        sw = np.linalg.svd(AW, compute_uv=False)
        if sw[-1] <= RANK_TOL * max(np.linalg.norm(A, 2), 1e-300):
            raise PreconditionError("A is rank deficient on null(Psi)", check="rank(A W)")
        AW_pinv = np.linalg.pinv(AW)
        T = W @ AW_pinv
        Psi_A = Psi_pinv - T @ (A @ Psi_pinv)
    else:
        T = None
        Psi_A = Psi_pinv
    x0 = b_bar = None
    if b is not None:
        b = _vector(b, m)
        x0 = T @ b if T is not None else np.zeros(n)
        b_bar = b - A @ x0
    return StdFormTransform(Psi_A, W, A @ Psi_A, x0, b_bar)
