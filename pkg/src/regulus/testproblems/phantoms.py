"""Procedural signals, images and phantoms with values in ``[0, 1]``.

Images are returned as ``(nx, ny)`` arrays; row ``i`` runs top to bottom and
column ``j`` left to right.  They are vectorised column by column elsewhere.
"""
from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .noise import philox

__all__ = ["SIGNALS", "IMAGES", "PHANTOMS", "MOTIONS", "signal", "image", "phantom", "motion_frames"]

SIGNALS = ("piecewise", "sigma", "curve0", "curve1", "curve2", "curve3")
IMAGES = ("satellite", "blobs", "edges", "grain")
PHANTOMS = ("shepp", "tectonic", "blocks", "disk")
MOTIONS = ("translating-disk", "rotating-bars", "static")


def _bump(t, c, w):
    return np.exp(-0.5 * ((t - c) / w) ** 2)


def signal(name, n):
    """1-D test signal sampled at the midpoints of ``n`` cells of ``[0, 1]``."""
    t = (np.arange(n) + 0.5) / n
    if name == "piecewise":
        x = np.zeros(n)
        x[(t >= 0.15) & (t < 0.4)] = 1.0
        x[(t >= 0.4) & (t < 0.6)] = 0.5
        x[(t >= 0.7) & (t < 0.9)] = 0.75
    elif name == "sigma":
        x = 1.0 / (1.0 + np.exp(-(t - 0.5) / 0.05))
    elif name == "curve0":
        x = _bump(t, 0.5, 0.1)
    elif name == "curve1":
        x = 0.6 * _bump(t, 0.3, 0.06) + _bump(t, 0.7, 0.08)
    elif name == "curve2":
        x = 0.5 + 0.3 * np.sin(2 * np.pi * t) + 0.15 * np.sin(5 * np.pi * t)
    elif name == "curve3":
        x = 0.5 * _bump(t, 0.3, 0.07) + 0.5 * (t >= 0.6)
    else:
        raise ParameterError(f"unknown signal {name!r}; expected one of {SIGNALS}")
    return np.clip(x, 0.0, 1.0)


def _grid(nx, ny):
    # u: vertical coordinate (+1 at the top row), v: horizontal
    u = 1.0 - (2.0 * np.arange(nx) + 1.0) / nx
    v = (2.0 * np.arange(ny) + 1.0) / ny - 1.0
    return np.meshgrid(u, v, indexing="ij")


def _ellipse(U, V, cu, cv, au, av, phi=0.0):
    c, s = np.cos(phi), np.sin(phi)
    du, dv = U - cu, V - cv
    a = c * dv + s * du
    b = -s * dv + c * du
    return (a / av) ** 2 + (b / au) ** 2 <= 1.0


def _box(U, V, u0, u1, v0, v1):
    return (U >= u0) & (U <= u1) & (V >= v0) & (V <= v1)


def image(name, nx, ny=None):
    """2-D test image for deblurring problems.

    Except for ``blobs`` the content sits inside ``[-0.8, 0.8]^2`` on a zero
    background, as for astronomical or microscopy targets.
    """
    ny = nx if ny is None else ny
    U, V = _grid(nx, ny)
    X = np.zeros((nx, ny))
    if name == "satellite":
        X[_box(U, V, -0.55, 0.55, -0.8, -0.3)] = 0.6
        X[_box(U, V, -0.55, 0.55, 0.3, 0.8)] = 0.6
        X[_box(U, V, -0.06, 0.06, -0.3, 0.3)] = 0.8
        X[_ellipse(U, V, 0.0, 0.0, 0.35, 0.22)] = 1.0
        X[_ellipse(U, V, 0.5, 0.0, 0.12, 0.12)] = 0.4
    elif name == "blobs":
        for cu, cv, w, a in [(0.4, -0.4, 0.18, 1.0), (-0.3, 0.35, 0.25, 0.8),
                             (-0.45, -0.5, 0.12, 0.6), (0.3, 0.5, 0.1, 0.9), (0.0, 0.0, 0.3, 0.5)]:
            X += a * np.exp(-0.5 * ((U - cu) ** 2 + (V - cv) ** 2) / w**2)
        X /= X.max()
    elif name == "edges":
        X[_box(U, V, -0.7, -0.1, -0.7, -0.1)] = 0.7
        X[_ellipse(U, V, 0.35, 0.35, 0.35, 0.35)] = 1.0
        X[(U + V > 0.2) & (U - V < -0.6) & (U > -0.8) & (V < 0.8)] = 0.4
        X[_box(U, V, 0.1, 0.8, -0.8, -0.5)] = 0.55
    elif name == "grain":
        rng = philox(1234)
        k = 24
        pts = rng.uniform(-1, 1, size=(k, 2))
        vals = 0.2 + 0.8 * rng.uniform(0, 1, size=k)
        d = (U[..., None] - pts[:, 0]) ** 2 + (V[..., None] - pts[:, 1]) ** 2
        X = np.where(np.maximum(abs(U), abs(V)) <= 0.8, vals[np.argmin(d, axis=-1)], 0.0)
    else:
        raise ParameterError(f"unknown image {name!r}; expected one of {IMAGES}")
    return np.clip(X, 0.0, 1.0)


# (value, u-semi-axis, v-semi-axis, center u, center v, rotation in degrees)
_SHEPP = [
    (1.0, 0.92, 0.69, 0.0, 0.0, 0.0),
    (-0.8, 0.874, 0.6624, -0.0184, 0.0, 0.0),
    (-0.2, 0.41, 0.11, 0.0, 0.22, 72.0),
    (-0.2, 0.31, 0.16, 0.0, -0.22, 108.0),
    (0.1, 0.25, 0.21, 0.35, 0.0, 0.0),
    (0.1, 0.046, 0.046, 0.1, 0.0, 0.0),
    (0.1, 0.046, 0.046, -0.1, 0.0, 0.0),
    (0.1, 0.023, 0.046, -0.605, -0.08, 0.0),
    (0.1, 0.023, 0.023, -0.605, 0.0, 0.0),
    (0.1, 0.046, 0.023, -0.605, 0.06, 0.0),
]


def phantom(name, nx, ny=None):
    """Tomography phantom on an ``nx``-by-``ny`` pixel grid."""
    ny = nx if ny is None else ny
    U, V = _grid(nx, ny)
    X = np.zeros((nx, ny))
    if name == "shepp":
        for val, au, av, cu, cv, deg in _SHEPP:
            X[_ellipse(U, V, cu, cv, au, av, np.deg2rad(deg))] += val
    elif name == "tectonic":
        inside = U**2 + V**2 <= 0.9**2
        fault = V > 0.15 * U + 0.1
        shift = np.where(fault, 0.18, 0.0)
        layer = np.floor((U + 0.12 * np.sin(3.0 * V) + shift + 1.0) * 3.0)
        X = np.where(inside, 0.25 + 0.75 * np.mod(layer, 4) / 3.0, 0.0)
    elif name == "blocks":
        X[_box(U, V, -0.6, 0.2, -0.6, -0.1)] = 1.0
        X[_box(U, V, 0.1, 0.7, 0.1, 0.7)] = 0.5
        X[_box(U, V, -0.7, -0.3, 0.2, 0.5)] = 0.75
    elif name == "disk":
        X[U**2 + V**2 <= 0.6**2] = 1.0
    else:
        raise ParameterError(f"unknown phantom {name!r}; expected one of {PHANTOMS}")
    return np.clip(X, 0.0, 1.0)


def motion_frames(name, nx, ny, nt):
    """Sequence of ``nt`` frames, shape ``(nt, nx, ny)``."""
    U, V = _grid(nx, ny)
    frames = np.zeros((nt, nx, ny))
    for t in range(nt):
        s = t / max(nt - 1, 1)
        X = frames[t]
        if name == "translating-disk":
            X[_box(U, V, -0.75, -0.45, 0.35, 0.75)] = 0.5
            X[_ellipse(U, V, -0.35 + 0.6 * s, -0.45 + 0.7 * s, 0.3, 0.3)] = 1.0
        elif name == "rotating-bars":
            phi = 0.5 * np.pi * s
            X[_ellipse(U, V, 0.0, 0.0, 0.75, 0.75)] = 0.3
            X[_ellipse(U, V, 0.0, 0.0, 0.6, 0.08, phi)] = 1.0
            X[_ellipse(U, V, 0.0, 0.0, 0.08, 0.45, phi)] = 0.8
        elif name == "static":
            X[:] = phantom("shepp", nx, ny)
        else:
            raise ParameterError(f"unknown motion {name!r}; expected one of {MOTIONS}")
    return np.clip(frames, 0.0, 1.0)
