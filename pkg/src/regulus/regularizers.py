"""Regularization operators: finite differences and a linear B-spline framelet.

Images are ``nx``-by-``ny`` arrays vectorised column by column, so ``nx`` is
the length of a column (the fast index).  Space-time volumes stack the ``nt``
vectorised frames.
"""
from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError
from .linop import IdentityOperator, KronOperator, LinearOperator, StackedOperator

__all__ = [
    "DerivativeOperator1D",
    "GradientOperator2D",
    "SpaceTimeOperator",
    "FrameletOperator",
    "gen_first_derivative_operator",
    "gen_first_derivative_operator_2D",
    "gen_spacetime_derivative_operator",
    "spatial_derivative_operator",
    "create_framelet_operator",
    "framelet_filters_1d",
]


class DerivativeOperator1D(LinearOperator):
    """Forward difference ``(Psi x)_i = x_i - x_{i+1}``, shape ``(n-1, n)``.

    With ``square=True`` a zero row is appended so the shape is ``(n, n)``.
    """

    def __init__(self, n, square=False):
        n = int(n)
        if n < 2:
            raise ShapeError(f"derivative operator needs n >= 2, got {n}")
        self.n = n
        self.square = bool(square)
        super().__init__((n if square else n - 1, n))

    def _matvec(self, x):
        return self._matmat(x[:, None])[:, 0]

    def _rmatvec(self, y):
        return self._rmatmat(y[:, None])[:, 0]

    def _matmat(self, X):
        D = X[:-1] - X[1:]
        if self.square:
            D = np.vstack([D, np.zeros((1, X.shape[1]))])
        return D

    def _rmatmat(self, Y):
        Y = Y[: self.n - 1]
        out = np.zeros((self.n, Y.shape[1]))
        out[:-1] += Y
        out[1:] -= Y
        return out


def gen_first_derivative_operator(n):
    """First-derivative operator with stencil ``[1, -1]``."""
    return DerivativeOperator1D(n)


class GradientOperator2D(StackedOperator):
    """Discrete gradient ``[I_ny kron Psi_x; Psi_y kron I_nx]``.

    The first block differentiates along columns (the ``nx`` direction), the
    second along rows.  ``square=True`` uses the square difference matrices
    with a zero last row, giving two ``nx*ny`` blocks aligned pixel by pixel.
    """

    def __init__(self, nx, ny, square=False):
        nx, ny = int(nx), int(ny)
        if nx < 2 or ny < 2:
            raise ShapeError(f"2-D gradient needs nx, ny >= 2, got ({nx}, {ny})")
        self.nx, self.ny = nx, ny
        Dx = DerivativeOperator1D(nx, square)
        Dy = DerivativeOperator1D(ny, square)
        super().__init__([KronOperator(IdentityOperator(ny), Dx), KronOperator(Dy, IdentityOperator(nx))])


def gen_first_derivative_operator_2D(nx, ny):
    return GradientOperator2D(nx, ny)


def spatial_derivative_operator(nx, ny=1, square=False):
    """Gradient for an ``nx``-by-``ny`` image; a 1-D difference when ``ny == 1``."""
    if int(ny) == 1:
        return DerivativeOperator1D(nx, square)
    return GradientOperator2D(nx, ny, square)


class SpaceTimeOperator(StackedOperator):
    """Space-time difference ``[I_nt kron Psi_s; Psi_t kron I_ns]``.

    For ``nt == 1`` only the spatial block is present.
    """

    def __init__(self, nx, ny, nt):
        nx, ny, nt = int(nx), int(ny), int(nt)
        if nt < 1:
            raise ShapeError(f"nt must be >= 1, got {nt}")
        self.nx, self.ny, self.nt = nx, ny, nt
        Ps = spatial_derivative_operator(nx, ny)
        self.spatial = Ps
        ns = nx * ny
        blocks = [KronOperator(IdentityOperator(nt), Ps)]
        if nt > 1:
            blocks.append(KronOperator(DerivativeOperator1D(nt), IdentityOperator(ns)))
        super().__init__(blocks)


def gen_spacetime_derivative_operator(nx, ny, nt):
    return SpaceTimeOperator(nx, ny, nt)


_MASKS = (
    np.array([1.0, 2.0, 1.0]) / 4.0,
    np.array([1.0, 0.0, -1.0]) * np.sqrt(2.0) / 4.0,
    np.array([-1.0, 2.0, -1.0]) / 4.0,
)


def _reflect(j, n):
    # half-sample symmetric extension: x[-1] = x[0], x[n] = x[n-1]
    j = np.mod(j, 2 * n)
    return np.where(j < n, j, 2 * n - 1 - j)


def framelet_filters_1d(n, dilation=1):
    """The three ``n``-by-``n`` filter matrices of one framelet level.

    Rows apply the masks at offsets ``(-dilation, 0, +dilation)`` with
    symmetric reflection at both ends, which keeps
    ``W0^T W0 + W1^T W1 + W2^T W2 = I``.
    """
    n = int(n)
    rows = np.repeat(np.arange(n), 3)
    offs = np.tile(np.array([-1, 0, 1]) * dilation, n)
    cols = _reflect(rows + offs, n)
    mats = []
    for w in _MASKS:
        vals = np.tile(w, n)
        mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
    return mats


class FrameletOperator(LinearOperator):
    """Undecimated linear B-spline framelet analysis operator ``W``.

    Level ``l`` uses masks dilated by ``2**(l-1)``.  The output lists the
    high-pass channels of each level in Kronecker order ``W_i kron W_j``
    (``i`` for the row direction ``ny``, ``j`` for ``nx``), followed by all
    channels of the last level including its low-pass, so ``W^T W = I``.
    Two 2-D levels give ``8 + 9 = 17`` channels; two 1-D levels give 5.
    """

    def __init__(self, nx, ny=1, level=2):
        nx, ny, level = int(nx), int(ny), int(level)
        if level < 1:
            raise ShapeError("framelet level must be >= 1")
        if nx < 4 or (ny != 1 and ny < 4):
            raise ShapeError(f"framelet operator needs sizes >= 4, got ({nx}, {ny})")
        self.nx, self.ny, self.level = nx, ny, level
        self.dim = 1 if ny == 1 else 2
        self._Wx = [framelet_filters_1d(nx, 2**l) for l in range(level)]
        self._WxT = [[W.T.tocsr() for W in ws] for ws in self._Wx]
        if self.dim == 2:
            self._Wy = [framelet_filters_1d(ny, 2**l) for l in range(level)]
            self._WyT = [[W.T.tocsr() for W in ws] for ws in self._Wy]
            self._pairs = list(itertools.product(range(3), range(3)))
        else:
            self._pairs = [(0, j) for j in range(3)]
        per = len(self._pairs)
        self.n_channels = level * (per - 1) + 1
        n = nx * ny
        super().__init__((self.n_channels * n, n))

    def _filt(self, l, i, j, X):
        Y = self._Wx[l][j] @ X
        if self.dim == 2:
            Y = (self._Wy[l][i] @ Y.T).T
        return Y

    def _filt_T(self, l, i, j, Y):
        X = self._WxT[l][j] @ Y
        if self.dim == 2:
            X = (self._WyT[l][i] @ X.T).T
        return X

    def _matvec(self, x):
        X = x.reshape(self.ny, self.nx).T
        out = []
        low = X
        for l in range(self.level):
            last = l == self.level - 1
            nxt = None
            for i, j in self._pairs:
                C = self._filt(l, i, j, low)
                if i == 0 and j == 0 and not last:
                    nxt = C
                else:
                    out.append(C.T.ravel())
            low = nxt
        return np.concatenate(out)

    def _rmatvec(self, y):
        n = self.nx * self.ny
        chans = y.reshape(-1, n)
        per = len(self._pairs)
        # offsets of each level's channels in the output
        starts = [l * (per - 1) for l in range(self.level)]
        acc = None
        for l in reversed(range(self.level)):
            last = l == self.level - 1
            k = starts[l]
            tot = np.zeros((self.nx, self.ny))
            for i, j in self._pairs:
                if i == 0 and j == 0 and not last:
                    C = acc
                else:
                    C = chans[k].reshape(self.ny, self.nx).T
                    k += 1
                tot += self._filt_T(l, i, j, C)
            acc = tot
        return acc.T.ravel()


def create_framelet_operator(nx, ny=1, level=2):
    """Framelet analysis operator for an ``nx``-by-``ny`` image (``ny=1`` for signals)."""
    return FrameletOperator(nx, ny, level)
