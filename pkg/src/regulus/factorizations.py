"""Dense SVD/GSVD, skinny QR, and incremental Krylov decompositions.

The generalized SVD of a pair ``(A, Psi)`` with ``A`` of shape ``(m, n)`` and
``Psi`` of shape ``(k, n)``, ``m >= n >= k``, is returned as

    A   = U  diag(c) Y^T,          U (m, n) orthonormal columns
    Psi = V [diag(s) 0] Y^T,       V (k, k) orthogonal

with ``c`` ascending, ``s`` descending, ``c_i**2 + s_i**2 = 1`` for
``i < k`` and ``c_i = 1`` for ``i >= k``.  It is computed from a QR
factorisation of the stacked matrix ``[A; Psi]`` followed by a CS
decomposition of the orthonormal factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Breakdown, InputError, PreconditionError, ShapeError
from .linop import aslinearoperator

__all__ = [
    "Svd",
    "Gsvd",
    "svd",
    "gsvd",
    "qr_skinny",
    "qr_append_column",
    "ArnoldiState",
    "GolubKahanState",
    "arnoldi_step",
    "golub_kahan_step",
    "BREAKDOWN_TOL",
]

BREAKDOWN_TOL = 1e-14


def _dense(M, name):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name} has non-finite entries")
    return M


@dataclass(frozen=True)
class Svd:
    """Thin SVD ``A = U diag(s) V^T`` with ``s`` in descending order."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class Gsvd:
    """Generalized SVD of ``(A, Psi)``; see the module docstring for the layout.

    Attributes
    ----------
    U : (m, n) ndarray
    V : (k, k) ndarray
    Y : (n, n) ndarray
    c : (n,) ndarray
        Ascending, ``c[k:] == 1``.
    s : (n,) ndarray
        Descending, ``s[k:] == 0``.
    Yinv_T : (n, n) ndarray
        ``inv(Y).T``; its columns are the vectors the solution is expanded in.
    k : int
    """

    U: np.ndarray
    V: np.ndarray
    Y: np.ndarray
    c: np.ndarray
    s: np.ndarray
    Yinv_T: np.ndarray
    k: int

    @property
    def gamma(self):
        """Generalized singular values ``c_i / s_i`` for ``i < k``."""
        return self.c[: self.k] / self.s[: self.k]


def svd(A):
    """Thin singular value decomposition of a dense matrix."""
    A = _dense(A, "A")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return Svd(U, s, Vt.T)


def _cs_pair(A, Psi):
    """Stacked-QR/CS factorisation without rank checks on ``Psi``.

    Returns ``(U, c, s, Z, R0, W, V)`` where ``Z = inv(R0) W`` is
    ``inv(Y).T``.  Requires ``[A; Psi]`` to have full column rank.
    """
    m, n = A.shape
    k = Psi.shape[0]
    Q, R0 = np.linalg.qr(np.vstack([A, Psi]))
    Q1, Q2 = Q[:m], Q[m:]
    V, lam, Wt = np.linalg.svd(Q2, full_matrices=True)
    W = Wt.T
    r = min(k, n)
    s = np.zeros(n)
    s[:r] = np.clip(lam[:r], 0.0, 1.0)
    T = Q1 @ W
    # factor with the well-conditioned (large c) columns first
    Qt, Rt = np.linalg.qr(T[:, ::-1])
    d = np.diag(Rt)
    sgn = np.where(d < 0, -1.0, 1.0)
    U = (Qt * sgn)[:, ::-1]
    c = np.abs(d)[::-1].copy()
    c[r:] = 1.0
    Z = np.linalg.solve(R0, W)
    return U, c, s, Z, R0, W, V


def gsvd(A, Psi):
    """Generalized singular value decomposition of ``(A, Psi)``.

    Parameters
    ----------
    A : (m, n) array_like
    Psi : (k, n) array_like
        Must have full row rank ``k`` and ``m >= n >= k``.

    Returns
    -------
    Gsvd

    Raises
    ------
    PreconditionError
        If a shape or rank assumption fails; ``err.check`` names it.
    """
    A = _dense(A, "A")
    Psi = _dense(Psi, "Psi")
    m, n = A.shape
    k = Psi.shape[0]
    if Psi.shape[1] != n:
        raise ShapeError(f"A has {n} columns but Psi has {Psi.shape[1]}")
    if not m >= n >= k:
        raise PreconditionError(f"need m >= n >= k, got m={m}, n={n}, k={k}", check="m>=n>=k")
    sp = np.linalg.svd(Psi, compute_uv=False)
    if sp[0] == 0.0 or sp[-1] <= max(k, n) * np.finfo(float).eps * sp[0]:
        raise PreconditionError("Psi does not have full row rank", check="rank(Psi)=k")
    ss = np.linalg.svd(np.vstack([A, Psi]), compute_uv=False)
    if ss[-1] <= 1e-12 * ss[0]:
        raise PreconditionError("null spaces of A and Psi intersect nontrivially",
                                check="null(A)∩null(Psi)={0}")
    U, c, s, Z, R0, W, V = _cs_pair(A, Psi)
    Y = R0.T @ W
    return Gsvd(U=U, V=V, Y=Y, c=c, s=s, Yinv_T=Z, k=k)


def qr_skinny(M):
    """Reduced QR factorisation with a nonnegative diagonal in ``R``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {M.shape}")
    if M.shape[0] < M.shape[1]:
        raise ShapeError(f"qr_skinny needs rows >= cols, got {M.shape}")
    Q, R = np.linalg.qr(M)
    sgn = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * sgn, R * sgn[:, None]


def qr_append_column(Q, R, m_new):
    """Update ``M = Q R`` to ``[M, m_new] = Q' R'``.

    Uses two passes of classical Gram-Schmidt.  A column that lies in
    ``range(Q)`` gets a (near-)zero last diagonal entry and ``Q`` is completed
    with an orthonormal direction so ``Q'`` stays orthonormal.
    """
    m_new = np.asarray(m_new, dtype=np.float64).ravel()
    nrow = m_new.shape[0]
    Q = np.asarray(Q, dtype=np.float64).reshape(nrow, -1)
    R = np.asarray(R, dtype=np.float64)
    j = Q.shape[1]
    if R.shape != (j, j):
        raise ShapeError(f"R must be {j}x{j}, got {R.shape}")
    if j >= nrow:
        raise ShapeError("cannot append a column: Q already spans the space")
    r = Q.T @ m_new
    w = m_new - Q @ r
    r2 = Q.T @ w
    w -= Q @ r2
    r += r2
    rho = np.linalg.norm(w)
    scale = np.linalg.norm(m_new)
    if rho > 1e-14 * scale and rho > 0.0:
        q = w / rho
    else:
        # dependent column: pick the canonical direction least represented in Q
        i = int(np.argmin(np.sum(Q * Q, axis=1))) if j else 0
        q = np.zeros(nrow)
        q[i] = 1.0
        for _ in range(2):
            q -= Q @ (Q.T @ q)
        q /= np.linalg.norm(q)
        rho = float(q @ w)
    Qn = np.empty((nrow, j + 1))
    Qn[:, :j] = Q
    Qn[:, j] = q
    Rn = np.zeros((j + 1, j + 1))
    Rn[:j, :j] = R
    Rn[:j, j] = r
    Rn[j, j] = rho
    return Qn, Rn


class _Buffer:
    """Column buffer with capacity doubling."""

    def __init__(self, nrow, cap=8):
        self.data = np.zeros((nrow, max(cap, 2)))
        self.ncol = 0

    def append(self, v):
        if self.ncol == self.data.shape[1]:
            grown = np.zeros((self.data.shape[0], 2 * self.data.shape[1]))
            grown[:, : self.ncol] = self.data[:, : self.ncol]
            self.data = grown
        self.data[:, self.ncol] = v
        self.ncol += 1

    def view(self, ncol=None):
        return self.data[:, : self.ncol if ncol is None else ncol]


class ArnoldiState:
    """Arnoldi decomposition ``A V_d = V_{d+1} H_d`` built with modified Gram-Schmidt.

    Attributes
    ----------
    d : int
        Number of completed steps.
    beta : float
        ``||b||``.
    norm_est : float
        Running lower estimate of ``||A||`` (largest ``||A v_j||`` seen).
    breakdown : bool
    """

    def __init__(self, A, b):
        self.A = aslinearoperator(A)
        n, n2 = self.A.shape
        if n != n2:
            raise ShapeError(f"Arnoldi needs a square operator, got {self.A.shape}")
        b = np.asarray(b, dtype=np.float64).ravel()
        if b.shape[0] != n:
            raise ShapeError(f"b has length {b.shape[0]}, expected {n}")
        self.beta = float(np.linalg.norm(b))
        if self.beta == 0.0:
            raise InputError("Arnoldi needs b != 0")
        self._V = _Buffer(n)
        self._V.append(b / self.beta)
        self._H = np.zeros((9, 8))
        self.d = 0
        self.norm_est = 0.0
        self.breakdown = False

    @property
    def V(self):
        """``V_{d+1}``, shape ``(n, d+1)``."""
        return self._V.view(self.d + 1)

    @property
    def H(self):
        """``H_d``, shape ``(d+1, d)``."""
        return self._H[: self.d + 1, : self.d]

    def step(self):
        if self.breakdown:
            raise Breakdown(self.d, self)
        d = self.d
        if d + 2 > self._H.shape[0] or d + 1 > self._H.shape[1]:
            H = np.zeros((2 * self._H.shape[1] + 1, 2 * self._H.shape[1]))
            H[: self._H.shape[0], : self._H.shape[1]] = self._H
            self._H = H
        V = self._V.view()
        w = self.A.matvec(V[:, d])
        self.norm_est = max(self.norm_est, float(np.linalg.norm(w)))
        for i in range(d + 1):
            h = float(V[:, i] @ w)
            self._H[i, d] = h
            w -= h * V[:, i]
        h = float(np.linalg.norm(w))
        self.d = d + 1
        if h <= BREAKDOWN_TOL * self.norm_est:
            self._H[d + 1, d] = 0.0
            self._V.append(np.zeros_like(w))
            self.breakdown = True
            raise Breakdown(self.d, self)
        self._H[d + 1, d] = h
        self._V.append(w / h)
        return self


class GolubKahanState:
    """Golub-Kahan bidiagonalization ``A V_d = U_{d+1} B_d``, ``A^T U_{d+1} = V_{d+1} Bbar_{d+1}^T``.

    Started from ``u_1 = b/||b||`` and ``v_1 = A^T u_1 / alpha_1``; no
    reorthogonalization unless ``reorth=True``.
    """

    def __init__(self, A, b, reorth=False):
        self.A = aslinearoperator(A)
        m, n = self.A.shape
        b = np.asarray(b, dtype=np.float64).ravel()
        if b.shape[0] != m:
            raise ShapeError(f"b has length {b.shape[0]}, expected {m}")
        self.beta = float(np.linalg.norm(b))
        if self.beta == 0.0:
            raise InputError("Golub-Kahan needs b != 0")
        self.reorth = bool(reorth)
        u = b / self.beta
        w = self.A.rmatvec(u)
        a = float(np.linalg.norm(w))
        if a == 0.0:
            raise InputError("Golub-Kahan needs A^T b != 0")
        self.norm_est = a
        self._U = _Buffer(m)
        self._V = _Buffer(n)
        self._U.append(u)
        self._V.append(w / a)
        self._alpha = [a]
        self._betas = [0.0]  # _betas[j] is the subdiagonal entry below alpha_j
        self.d = 0
        self.breakdown = False

    @property
    def U(self):
        return self._U.view(self.d + 1)

    @property
    def V(self):
        return self._V.view(self.d + 1)

    @property
    def alphas(self):
        return np.array(self._alpha[: self.d + 1])

    @property
    def betas(self):
        """Subdiagonal ``beta_2, ..., beta_{d+1}``."""
        return np.array(self._betas[1: self.d + 1])

    @property
    def Bbar(self):
        """Lower bidiagonal ``(d+1, d+1)`` matrix."""
        k = self.d + 1
        B = np.diag(self._alpha[:k])
        if k > 1:
            B[np.arange(1, k), np.arange(k - 1)] = self._betas[1:k]
        return B

    @property
    def B(self):
        """``B_d``, the first ``d`` columns of ``Bbar_{d+1}``, shape ``(d+1, d)``."""
        return self.Bbar[:, : self.d]

    def step(self):
        if self.breakdown:
            raise Breakdown(self.d, self)
        d = self.d
        Uv, Vv = self._U.view(), self._V.view()
        Av = self.A.matvec(Vv[:, d])
        self.norm_est = max(self.norm_est, float(np.linalg.norm(Av)))
        p = Av - self._alpha[d] * Uv[:, d]
        if self.reorth:
            for _ in range(2):
                p -= Uv @ (Uv.T @ p)
        beta = float(np.linalg.norm(p))
        self.d = d + 1
        if beta <= BREAKDOWN_TOL * self.norm_est:
            self._betas.append(0.0)
            self._alpha.append(0.0)
            self._U.append(np.zeros_like(p))
            self._V.append(np.zeros(Vv.shape[0]))
            self.breakdown = True
            raise Breakdown(self.d, self)
        u = p / beta
        self._U.append(u)
        self._betas.append(beta)
        Atu = self.A.rmatvec(u)
        self.norm_est = max(self.norm_est, float(np.linalg.norm(Atu)))
        q = Atu - beta * Vv[:, d]
        if self.reorth:
            Vv = self._V.view()
            for _ in range(2):
                q -= Vv @ (Vv.T @ q)
        alpha = float(np.linalg.norm(q))
        if alpha <= BREAKDOWN_TOL * self.norm_est:
            self._alpha.append(0.0)
            self._V.append(np.zeros_like(q))
            self.breakdown = True
            raise Breakdown(self.d, self)
        self._alpha.append(alpha)
        self._V.append(q / alpha)
        return self


def arnoldi_step(A, state):
    """Advance an Arnoldi decomposition by one step.

    ``state`` is an :class:`ArnoldiState` or a starting vector ``b``.  Raises
    :class:`~regulus.errors.Breakdown` (with a consistent state attached) when
    the Krylov space is exhausted.
    """
    if not isinstance(state, ArnoldiState):
        state = ArnoldiState(A, state)
    return state.step()


def golub_kahan_step(A, state, reorth=False):
    """Advance a Golub-Kahan bidiagonalization by one step (see :func:`arnoldi_step`)."""
    if not isinstance(state, GolubKahanState):
        state = GolubKahanState(A, state, reorth=reorth)
    return state.step()
