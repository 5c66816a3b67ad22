"""Gaussian-blur test problems in one and two dimensions.

The point spread function is ``exp(-0.5 * (di**2 / beta1**2 + dj**2 / beta2**2))``
truncated to an odd window and scaled to unit sum, so larger ``beta`` means
wider blur.  Solvers get a convolution operator with reflective boundary
conditions; data are generated with zero boundary conditions unless the
inverse crime is committed.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import ParameterError, ShapeError
from ..linop import KronOperator, MatrixOperator
from .base import TestProblem
from .noise import add_noise
from .phantoms import image, signal

__all__ = ["gaussian_psf_1d", "gaussian_psf_2d", "blur_matrix_1d", "deblur1d", "deblur2d"]


def gaussian_psf_1d(window, spread):
    """Normalised 1-D Gaussian kernel of odd length ``window``."""
    window = int(window)
    if window < 1 or window % 2 == 0:
        raise ShapeError(f"PSF window must be odd and positive, got {window}")
    if not spread > 0:
        raise ParameterError(f"PSF spread must be > 0, got {spread}")
    h = window // 2
    d = np.arange(-h, h + 1, dtype=np.float64)
    k = np.exp(-0.5 * (d / spread) ** 2)
    return k / k.sum()


def gaussian_psf_2d(window, spreads):
    """Separable 2-D kernel ``outer(k1, k2)``; rows follow the first window/spread."""
    return np.outer(gaussian_psf_1d(window[0], spreads[0]), gaussian_psf_1d(window[1], spreads[1]))


def blur_matrix_1d(n, kernel, bc="reflective"):
    """Sparse ``n``-by-``n`` convolution matrix with ``"reflective"`` or ``"zero"`` boundaries."""
    kernel = np.asarray(kernel, dtype=np.float64)
    h = kernel.size // 2
    rows, cols, vals = [], [], []
    i = np.arange(n)
    for off, kv in zip(range(-h, h + 1), kernel):
        j = i + off
        if bc == "zero":
            ok = (j >= 0) & (j < n)
            rows.append(i[ok])
            cols.append(j[ok])
            vals.append(np.full(ok.sum(), kv))
        elif bc == "reflective":
            j = np.mod(j, 2 * n)
            j = np.where(j < n, j, 2 * n - 1 - j)
            rows.append(i)
            cols.append(j)
            vals.append(np.full(n, kv))
        else:
            raise ParameterError(f"unknown boundary condition {bc!r}")
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return M.tocsr()  # duplicates are summed


def _noisy(b_true, noise):
    noise = dict(noise or {})
    kind = noise.get("kind", "gaussian")
    level = noise.get("level", 0.01)
    seed = int(noise.get("seed", 0))
    b, delta = add_noise(b_true, kind, level=level, seed=seed, fraction=noise.get("fraction"))
    return b, delta, {"kind": kind, "level": level, "seed": seed, "delta": delta}


def deblur1d(n=200, signal_name="curve2", spread=30.0, window=None, noise=None, commit_crime=False):
    """1-D Gaussian deblurring problem.

    Parameters
    ----------
    n : int
        Signal length, at least 8.
    signal_name : str
        One of :data:`~regulus.testproblems.phantoms.SIGNALS`.
    spread : float
        Gaussian width in samples.
    window : int, optional
        Odd kernel length; defaults to ``2*(n//2) + 1`` (the whole signal).
    noise : dict, optional
        ``{"kind", "level", "seed"}``; defaults to 1% Gaussian noise, seed 0.
    commit_crime : bool
        Generate data with the solver's operator.
    """
    n = int(n)
    if n < 8:
        raise ShapeError(f"deblur1d needs n >= 8, got {n}")
    window = 2 * (n // 2) + 1 if window is None else int(window)
    k = gaussian_psf_1d(window, spread)
    A = MatrixOperator(blur_matrix_1d(n, k, "reflective"))
    A_data = A if commit_crime else MatrixOperator(blur_matrix_1d(n, k, "zero"))
    x = signal(signal_name, n)
    b_true = A_data.matvec(x)
    b, delta, nmeta = _noisy(b_true, noise)
    meta = {"signal": signal_name, "psf": {"window": [window], "spread": [float(spread)]},
            "noise": nmeta, "angles": None}
    return TestProblem(A, A_data, x, b_true, b, delta, "deblur1d", (n,), bool(commit_crime), meta)


def deblur2d(nx=32, ny=None, image_name="satellite", window=(9, 9), spreads=(3.0, 3.0), noise=None,
             commit_crime=False):
    """2-D separable Gaussian deblurring problem on an ``nx``-by-``ny`` image.

    The operator is ``K_y kron K_x`` acting on the column-stacked image, where
    ``K_x`` blurs along columns with ``(window[0], spreads[0])`` and ``K_y``
    along rows with ``(window[1], spreads[1])``.
    """
    ny = nx if ny is None else int(ny)
    nx = int(nx)
    w1, w2 = (int(w) for w in window)
    if w1 % 2 == 0 or w2 % 2 == 0:
        raise ShapeError(f"PSF windows must be odd, got {window}")
    if nx < w1 or ny < w2:
        raise ShapeError(f"image {nx}x{ny} smaller than the PSF window {window}")
    kx = gaussian_psf_1d(w1, spreads[0])
    ky = gaussian_psf_1d(w2, spreads[1])
    A = KronOperator(MatrixOperator(blur_matrix_1d(ny, ky)), MatrixOperator(blur_matrix_1d(nx, kx)))
    if commit_crime:
        A_data = A
    else:
        A_data = KronOperator(MatrixOperator(blur_matrix_1d(ny, ky, "zero")),
                              MatrixOperator(blur_matrix_1d(nx, kx, "zero")))
    X = image(image_name, nx, ny)
    x = X.ravel(order="F")
    b_true = A_data.matvec(x)
    b, delta, nmeta = _noisy(b_true, noise)
    meta = {"image": image_name, "psf": {"window": [w1, w2], "spread": [float(s) for s in spreads]},
            "noise": nmeta, "angles": None}
    return TestProblem(A, A_data, x, b_true, b, delta, "deblur2d", (nx, ny), bool(commit_crime), meta)
