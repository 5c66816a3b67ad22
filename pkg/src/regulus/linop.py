"""Matrix-free linear operators.

Every operator maps 1-D float64 arrays of length ``shape[1]`` to arrays of
length ``shape[0]`` and knows its transpose action.  Combinators (Kronecker,
block-diagonal, composition, vertical stacking) never assemble the matrix
they represent; ``to_dense`` exists for oracle checks at small sizes.

Images are vectorised by stacking columns, so for ``X`` of shape
``(p, q)``, ``vec(X) = X.ravel(order="F")`` and
``(B kron C) vec(X) = vec(C X B^T)``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import InputError, ShapeError

__all__ = [
    "DENSE_LIMIT",
    "LinearOperator",
    "MatrixOperator",
    "IdentityOperator",
    "DiagonalOperator",
    "KronOperator",
    "BlockDiagOperator",
    "ComposedOperator",
    "StackedOperator",
    "aslinearoperator",
    "kron_apply",
    "block_diag_apply",
    "operator_norm_estimate",
    "save_matrix_csv",
    "load_matrix_csv",
]

# Largest number of entries to_dense() will materialise.
DENSE_LIMIT = 2**24


def _as_vector(x, n, what="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and 1 in x.shape:
        x = x.ravel()
    if x.ndim != 1 or x.shape[0] != n:
        raise ShapeError(f"{what} has shape {np.shape(x)}, expected ({n},)")
    return x


class LinearOperator:
    """Base class for a real linear map with a transpose.

    Subclasses implement ``_matvec`` and ``_rmatvec``; overriding
    ``_matmat``/``_rmatmat`` is optional and only matters for speed.
    """

    def __init__(self, shape):
        m, n = (int(s) for s in shape)
        if m < 0 or n < 0:
            raise ShapeError(f"invalid shape {shape}")
        self._shape = (m, n)

    @property
    def shape(self):
        return self._shape

    def matvec(self, x):
        x = _as_vector(x, self._shape[1])
        return np.asarray(self._matvec(x), dtype=np.float64).reshape(self._shape[0])

    def rmatvec(self, y):
        y = _as_vector(y, self._shape[0])
        return np.asarray(self._rmatvec(y), dtype=np.float64).reshape(self._shape[1])

    def matmat(self, X):
        """Apply the operator to every column of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self._shape[1]:
            raise ShapeError(f"matmat operand has shape {X.shape}, operator is {self._shape}")
        return self._matmat(X)

    def rmatmat(self, Y):
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[0] != self._shape[0]:
            raise ShapeError(f"rmatmat operand has shape {Y.shape}, operator is {self._shape}")
        return self._rmatmat(Y)

    def _matmat(self, X):
        out = np.empty((self._shape[0], X.shape[1]))
        for j in range(X.shape[1]):
            out[:, j] = self._matvec(X[:, j])
        return out

    def _rmatmat(self, Y):
        out = np.empty((self._shape[1], Y.shape[1]))
        for j in range(Y.shape[1]):
            out[:, j] = self._rmatvec(Y[:, j])
        return out

    @property
    def T(self):
        return _TransposedOperator(self)

    def __call__(self, x):
        return self.matvec(x)

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            return ComposedOperator(self, other)
        other = np.asarray(other)
        if other.ndim == 1:
            return self.matvec(other)
        return self.matmat(other)

    def to_dense(self):
        """Materialise the operator as a dense array (small operators only)."""
        m, n = self._shape
        if m * n > DENSE_LIMIT:
            raise ShapeError(f"operator {self._shape} exceeds the dense limit of {DENSE_LIMIT} entries")
        return self._matmat(np.eye(n))

    def __repr__(self):
        return f"<{type(self).__name__} {self._shape[0]}x{self._shape[1]}>"


class _TransposedOperator(LinearOperator):
    def __init__(self, op):
        super().__init__((op.shape[1], op.shape[0]))
        self.op = op

    def _matvec(self, x):
        return self.op._rmatvec(x)

    def _rmatvec(self, y):
        return self.op._matvec(y)

    def _matmat(self, X):
        return self.op._rmatmat(X)

    def _rmatmat(self, Y):
        return self.op._matmat(Y)

    @property
    def T(self):
        return self.op


class MatrixOperator(LinearOperator):
    """Wrap an explicit dense array or a scipy sparse matrix."""

    def __init__(self, M):
        if sp.issparse(M):
            M = sp.csr_matrix(M, dtype=np.float64)
            if not np.all(np.isfinite(M.data)):
                raise InputError("matrix has non-finite entries")
        else:
            M = np.array(M, dtype=np.float64)
            if M.ndim != 2:
                raise ShapeError(f"expected a 2-D array, got shape {M.shape}")
            if not np.all(np.isfinite(M)):
                raise InputError("matrix has non-finite entries")
            M.setflags(write=False)
        super().__init__(M.shape)
        self.matrix = M
        self._MT = M.T.tocsr() if sp.issparse(M) else M.T

    def _matvec(self, x):
        return self.matrix @ x

    def _rmatvec(self, y):
        return self._MT @ y

    def _matmat(self, X):
        return np.asarray(self.matrix @ X)

    def _rmatmat(self, Y):
        return np.asarray(self._MT @ Y)

    def to_dense(self):
        m, n = self.shape
        if m * n > DENSE_LIMIT:
            raise ShapeError(f"operator {self.shape} exceeds the dense limit of {DENSE_LIMIT} entries")
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.array(self.matrix)


class IdentityOperator(LinearOperator):
    def __init__(self, n):
        super().__init__((n, n))

    def _matvec(self, x):
        return x.copy()

    _rmatvec = _matvec

    def _matmat(self, X):
        return X.copy()

    _rmatmat = _matmat


class DiagonalOperator(LinearOperator):
    def __init__(self, diag):
        d = np.array(diag, dtype=np.float64).ravel()
        d.setflags(write=False)
        super().__init__((d.size, d.size))
        self.diag = d

    def _matvec(self, x):
        return self.diag * x

    _rmatvec = _matvec

    def _matmat(self, X):
        return self.diag[:, None] * X

    _rmatmat = _matmat


def aslinearoperator(obj):
    """Return ``obj`` as a :class:`LinearOperator` (arrays and sparse matrices are wrapped)."""
    if isinstance(obj, LinearOperator):
        return obj
    if sp.issparse(obj) or isinstance(obj, np.ndarray):
        return MatrixOperator(obj)
    if isinstance(obj, (list, tuple)):
        return MatrixOperator(np.asarray(obj, dtype=np.float64))
    raise TypeError(f"cannot interpret {type(obj).__name__} as a linear operator")


class KronOperator(LinearOperator):
    """Kronecker product ``B kron C`` applied by reshape-multiply-reshape.

    With column stacking, ``(B kron C) vec(X) = vec(C X B^T)`` where ``X`` has
    ``C.shape[1]`` rows and ``B.shape[1]`` columns.
    """

    def __init__(self, B, C):
        self.B = aslinearoperator(B)
        self.C = aslinearoperator(C)
        (mb, nb), (mc, nc) = self.B.shape, self.C.shape
        super().__init__((mb * mc, nb * nc))

    def _matvec(self, x):
        return self._matmat(x[:, None])[:, 0]

    def _rmatvec(self, y):
        return self._rmatmat(y[:, None])[:, 0]

    def _matmat(self, X):
        (mb, nb), (mc, nc) = self.B.shape, self.C.shape
        k = X.shape[1]
        # columns of X -> stack of (nc, nb) matrices laid side by side
        Xs = X.reshape(nb, nc, k).transpose(1, 0, 2).reshape(nc, nb * k)
        Z = self.C.matmat(Xs).reshape(mc, nb, k)  # C X
        Zt = Z.transpose(1, 0, 2).reshape(nb, mc * k)
        Y = self.B.matmat(Zt).reshape(mb, mc, k)  # B (C X)^T = (C X B^T)^T
        return Y.reshape(mb * mc, k)

    def _rmatmat(self, Y):
        (mb, nb), (mc, nc) = self.B.shape, self.C.shape
        k = Y.shape[1]
        Ys = Y.reshape(mb, mc, k).transpose(1, 0, 2).reshape(mc, mb * k)
        Z = self.C.rmatmat(Ys).reshape(nc, mb, k)
        Zt = Z.transpose(1, 0, 2).reshape(mb, nc * k)
        X = self.B.rmatmat(Zt).reshape(nb, nc, k)
        return X.reshape(nb * nc, k)


class BlockDiagOperator(LinearOperator):
    """Block-diagonal operator ``diag(A_1, ..., A_nt)``."""

    def __init__(self, blocks):
        self.blocks = tuple(aslinearoperator(b) for b in blocks)
        if not self.blocks:
            raise ShapeError("block-diagonal operator needs at least one block")
        rows = np.array([b.shape[0] for b in self.blocks])
        cols = np.array([b.shape[1] for b in self.blocks])
        self._row_off = np.concatenate([[0], np.cumsum(rows)])
        self._col_off = np.concatenate([[0], np.cumsum(cols)])
        super().__init__((int(rows.sum()), int(cols.sum())))

    def _matvec(self, x):
        return np.concatenate([
            b.matvec(x[self._col_off[i]:self._col_off[i + 1]]) for i, b in enumerate(self.blocks)
        ])

    def _rmatvec(self, y):
        return np.concatenate([
            b.rmatvec(y[self._row_off[i]:self._row_off[i + 1]]) for i, b in enumerate(self.blocks)
        ])

    def _matmat(self, X):
        return np.vstack([
            b.matmat(X[self._col_off[i]:self._col_off[i + 1]]) for i, b in enumerate(self.blocks)
        ])

    def _rmatmat(self, Y):
        return np.vstack([
            b.rmatmat(Y[self._row_off[i]:self._row_off[i + 1]]) for i, b in enumerate(self.blocks)
        ])


class ComposedOperator(LinearOperator):
    """Product ``A @ B`` evaluated right to left."""

    def __init__(self, A, B):
        self.A = aslinearoperator(A)
        self.B = aslinearoperator(B)
        if self.A.shape[1] != self.B.shape[0]:
            raise ShapeError(f"cannot compose {self.A.shape} with {self.B.shape}")
        super().__init__((self.A.shape[0], self.B.shape[1]))

    def _matvec(self, x):
        return self.A.matvec(self.B.matvec(x))

    def _rmatvec(self, y):
        return self.B.rmatvec(self.A.rmatvec(y))

    def _matmat(self, X):
        return self.A.matmat(self.B.matmat(X))

    def _rmatmat(self, Y):
        return self.B.rmatmat(self.A.rmatmat(Y))


class StackedOperator(LinearOperator):
    """Vertical stacking ``[A_1; A_2; ...]`` of operators with equal column count."""

    def __init__(self, ops):
        self.ops = tuple(aslinearoperator(o) for o in ops)
        if not self.ops:
            raise ShapeError("stacking needs at least one operator")
        n = self.ops[0].shape[1]
        if any(o.shape[1] != n for o in self.ops):
            raise ShapeError("stacked operators must share the column count")
        rows = [o.shape[0] for o in self.ops]
        self._row_off = np.concatenate([[0], np.cumsum(rows)])
        super().__init__((int(sum(rows)), n))

    def _matvec(self, x):
        return np.concatenate([o.matvec(x) for o in self.ops])

    def _rmatvec(self, y):
        out = np.zeros(self.shape[1])
        for i, o in enumerate(self.ops):
            out += o.rmatvec(y[self._row_off[i]:self._row_off[i + 1]])
        return out

    def _matmat(self, X):
        return np.vstack([o.matmat(X) for o in self.ops])

    def _rmatmat(self, Y):
        out = np.zeros((self.shape[1], Y.shape[1]))
        for i, o in enumerate(self.ops):
            out += o.rmatmat(Y[self._row_off[i]:self._row_off[i + 1]])
        return out

    def split(self, y):
        """Split a range vector into the pieces belonging to each stacked operator."""
        return [y[self._row_off[i]:self._row_off[i + 1]] for i in range(len(self.ops))]


def kron_apply(B, C, x):
    """Compute ``(B kron C) x`` without forming the Kronecker product."""
    op = KronOperator(B, C)
    return op.matvec(x)


def block_diag_apply(op, x):
    """Apply a :class:`BlockDiagOperator` blockwise and concatenate."""
    if not isinstance(op, BlockDiagOperator):
        raise TypeError("expected a BlockDiagOperator")
    return op.matvec(x)


def operator_norm_estimate(op, iters=50, seed=0):
    """Lower estimate of the largest singular value by power iteration on ``A^T A``.

    The returned value is the largest ``||A v_j||`` seen over unit iterates,
    so it never exceeds the true norm and cannot decrease as ``iters`` grows.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    op = aslinearoperator(op)
    n = op.shape[1]
    if n == 0 or op.shape[0] == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    best = 0.0
    for _ in range(iters):
        Av = op.matvec(v)
        nrm = np.linalg.norm(Av)
        best = max(best, nrm)
        if nrm == 0.0:
            break
        w = op.rmatvec(Av)
        wn = np.linalg.norm(w)
        if wn == 0.0:
            break
        v = w / wn
    return float(best)


def save_matrix_csv(path, M):
    """Write a matrix (or a vector, as one column) as headerless CSV, 17 significant digits."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def load_matrix_csv(path):
    M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if not np.all(np.isfinite(M)):
        raise InputError(f"{path}: non-finite entries")
    return M
