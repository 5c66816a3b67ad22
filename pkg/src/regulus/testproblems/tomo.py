"""Parallel-beam tomography test problems.

The image occupies an ``n``-by-``n`` grid of unit pixels centred at the
origin.  For view angle ``theta`` the rays are the lines
``{p : p . (cos theta, sin theta) = s}`` for ``nd = ceil(sqrt(2) n)``
detector offsets ``s`` spaced one pixel apart and centred at zero.  Matrix
entries are the exact intersection lengths of each ray with each pixel
(Siddon's traversal).  Sinogram rows are ordered detector-fastest, one view
after another.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from ..errors import ParameterError, ShapeError
from ..linop import BlockDiagOperator, MatrixOperator
from .base import TestProblem
from .deblur import _noisy
from .phantoms import motion_frames, phantom

__all__ = ["n_detectors", "ray_pixel_lengths", "parallel_beam_matrix", "angle_schedule", "tomo",
           "dynamic_tomo", "DATA_ANGLE_OFFSET_DEG"]

DATA_ANGLE_OFFSET_DEG = 0.5


def n_detectors(n):
    return int(math.ceil(math.sqrt(2.0) * n))


def ray_pixel_lengths(n, theta, s):
    """Pixels crossed by one ray and the lengths of the crossings.

    Returns ``(idx, lengths)`` with column-stacked pixel indices
    ``i + j*n`` (``i`` the row from the top, ``j`` the column from the left).
    """
    c, si = math.cos(theta), math.sin(theta)
    half = n / 2.0
    px, py = s * c, s * si  # foot point; direction (-sin, cos)
    dx, dy = -si, c
    lo, hi = -math.inf, math.inf
    ts = []
    edges = np.arange(n + 1, dtype=np.float64) - half
    for p, dv in ((px, dx), (py, dy)):
        if abs(dv) < 1e-15:
            if not -half <= p <= half:
                return np.empty(0, dtype=np.int64), np.empty(0)
            continue
        t = (edges - p) / dv
        lo = max(lo, min(t[0], t[-1]))
        hi = min(hi, max(t[0], t[-1]))
        ts.append(t)
    if not hi > lo:
        return np.empty(0, dtype=np.int64), np.empty(0)
    t = np.concatenate(ts + [np.array([lo, hi])])
    t = np.unique(t[(t >= lo) & (t <= hi)])
    seg = np.diff(t)
    mid = 0.5 * (t[1:] + t[:-1])
    xm = px + mid * dx
    ym = py + mid * dy
    j = np.floor(xm + half).astype(np.int64)
    i = np.floor(half - ym).astype(np.int64)
    ok = (seg > 1e-12) & (i >= 0) & (i < n) & (j >= 0) & (j < n)
    return i[ok] + j[ok] * n, seg[ok]


def parallel_beam_matrix(n, angles, nd=None):
    """Sparse ``(len(angles)*nd, n*n)`` projection matrix for angles in radians."""
    n = int(n)
    nd = n_detectors(n) if nd is None else int(nd)
    offsets = np.arange(nd) - (nd - 1) / 2.0
    rows, cols, vals = [], [], []
    r = 0
    for theta in np.asarray(angles, dtype=np.float64):
        for s in offsets:
            idx, ln = ray_pixel_lengths(n, theta, s)
            rows.append(np.full(idx.size, r, dtype=np.int64))
            cols.append(idx)
            vals.append(ln)
            r += 1
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(len(angles) * nd, n * n))
    return M


def tomo(nx=64, ny=None, views=30, phantom_name="shepp", noise=None, commit_crime=False):
    """Static parallel-beam CT problem.

    Solver angles are ``k*pi/views``, ``k = 0..views-1``; data are generated
    with every angle shifted by half a degree unless ``commit_crime``.
    Noise defaults to 0.1% Gaussian with seed 0.
    """
    nx = int(nx)
    ny = nx if ny is None else int(ny)
    if nx != ny:
        raise ShapeError(f"tomography needs a square image, got {nx}x{ny}")
    if nx < 2:
        raise ShapeError("tomography needs nx >= 2")
    views = int(views)
    if views < 1:
        raise ParameterError(f"views must be >= 1, got {views}")
    angles = np.arange(views) * np.pi / views
    A = MatrixOperator(parallel_beam_matrix(nx, angles))
    data_angles = angles if commit_crime else angles + np.deg2rad(DATA_ANGLE_OFFSET_DEG)
    A_data = A if commit_crime else MatrixOperator(parallel_beam_matrix(nx, data_angles))
    x = phantom(phantom_name, nx, ny).ravel(order="F")
    b_true = A_data.matvec(x)
    noise = {"kind": "gaussian", "level": 0.001, **(noise or {})}
    b, delta, nmeta = _noisy(b_true, noise)
    meta = {"phantom": phantom_name, "angles": np.rad2deg(angles).tolist(),
            "data_angles": np.rad2deg(data_angles).tolist(), "n_detectors": n_detectors(nx),
            "noise": nmeta, "psf": None}
    return TestProblem(A, A_data, x, b_true, b, delta, "tomo", (nx, ny), bool(commit_crime), meta)


def angle_schedule(views, nt, start=0.0, step=None, shift=1.0):
    """Degree angles ``start + j*step + t*shift`` for ``j < views``, one row per time step."""
    step = 180.0 / views if step is None else float(step)
    j = np.arange(int(views))
    return np.array([start + j * step + t * shift for t in range(int(nt))], dtype=np.float64)


def dynamic_tomo(nx=32, ny=None, nt=8, views=10, motion="translating-disk", start=0.0, step=None,
                 shift=1.0, noise=None, commit_crime=False):
    """Dynamic CT problem with a block-diagonal operator, one block per time step.

    Frame ``t`` is measured at the angles of row ``t`` of
    :func:`angle_schedule`; data use angles shifted by half a degree unless
    ``commit_crime``.  Noise defaults to 1% Gaussian with seed 0 on the
    whole stacked sinogram.
    """
    nx = int(nx)
    ny = nx if ny is None else int(ny)
    nt = int(nt)
    if nx != ny:
        raise ShapeError(f"tomography needs a square image, got {nx}x{ny}")
    if nt < 2:
        raise ShapeError(f"dynamic problems need nt >= 2, got {nt}")
    sched = angle_schedule(views, nt, start, step, shift)
    blocks, data_blocks = [], []
    for t in range(nt):
        rad = np.deg2rad(sched[t])
        Ablk = MatrixOperator(parallel_beam_matrix(nx, rad))
        blocks.append(Ablk)
        if commit_crime:
            data_blocks.append(Ablk)
        else:
            data_blocks.append(MatrixOperator(
                parallel_beam_matrix(nx, rad + np.deg2rad(DATA_ANGLE_OFFSET_DEG))))
    A = BlockDiagOperator(blocks)
    A_data = A if commit_crime else BlockDiagOperator(data_blocks)
    frames = motion_frames(motion, nx, ny, nt)
    x = np.concatenate([F.ravel(order="F") for F in frames])
    b_true = A_data.matvec(x)
    noise = {"kind": "gaussian", "level": 0.01, **(noise or {})}
    b, delta, nmeta = _noisy(b_true, noise)
    meta = {"motion": motion, "angles": sched.tolist(), "n_detectors": n_detectors(nx),
            "noise": nmeta, "psf": None}
    return TestProblem(A, A_data, x, b_true, b, delta, "dynamic_tomo", (nx, ny, nt),
                       bool(commit_crime), meta)
