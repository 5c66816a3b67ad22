"""Reproducible noise generation.

Random numbers come from the Philox-4x64 counter-based generator seeded
with the user's integer.  Gaussian and Laplace variates are produced by
inverse-CDF transforms of open-interval uniforms, so a given seed yields the
same noise on any platform with the same Philox stream.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from ..errors import ParameterError

__all__ = ["add_noise", "philox", "uniform_open"]

NOISE_KINDS = ("gaussian", "laplace", "impulse")


def philox(seed):
    """``numpy.random.Generator`` backed by Philox, seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed)))


def uniform_open(rng, n):
    """``n`` uniforms in the open interval ``(0, 1)`` on the 2**-53 grid shifted by half a step."""
    k = rng.integers(0, 2**53, size=n, dtype=np.int64)
    return (k.astype(np.float64) + 0.5) * 2.0**-53


def add_noise(b_true, kind="gaussian", level=None, seed=0, fraction=None):
    """Add scaled noise to ``b_true``.

    Parameters
    ----------
    b_true : (m,) array_like
    kind : {"gaussian", "laplace", "impulse"}
    level : float
        Relative noise level ``||e|| / ||b_true||`` (gaussian, laplace).
    seed : int
    fraction : float
        Fraction of corrupted entries (impulse); ``level`` is accepted as an
        alias.

    Returns
    -------
    b : ndarray
    delta : float
        ``||b - b_true||``.
    """
    b_true = np.asarray(b_true, dtype=np.float64).ravel()
    m = b_true.size
    rng = philox(seed)
    if kind in ("gaussian", "laplace"):
        if level is None or not level > 0:
            raise ParameterError(f"noise level must be > 0, got {level}")
        u = uniform_open(rng, m)
        if kind == "gaussian":
            g = ndtri(u)
        else:
            c = u - 0.5
            g = -np.sign(c) * np.log1p(-2.0 * np.abs(c))
        gn = np.linalg.norm(g)
        e = (level * np.linalg.norm(b_true) / gn) * g
        b = b_true + e
    elif kind == "impulse":
        frac = fraction if fraction is not None else level
        if frac is None or not 0 < frac < 1:
            raise ParameterError(f"impulse fraction must be in (0, 1), got {frac}")
        count = max(1, int(round(frac * m)))
        idx = rng.permutation(m)[:count]
        lo, hi = float(b_true.min()), float(b_true.max())
        b = b_true.copy()
        b[idx] = lo + (hi - lo) * uniform_open(rng, count)
    else:
        raise ParameterError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    return b, float(np.linalg.norm(b - b_true))
