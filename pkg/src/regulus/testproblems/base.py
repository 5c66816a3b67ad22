"""Container for generated inverse problems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TestProblem:
    """A linear inverse problem ``b = A_data x_true + e``.

    Attributes
    ----------
    A : LinearOperator
        Operator handed to solvers.
    A_data : LinearOperator
        Operator that generated ``b_true``; identical to ``A`` when the
        problem commits the inverse crime.
    x_true : ndarray or None
    b_true, b : ndarray
        Noise-free and noisy data.
    delta : float
        ``||b - b_true||``.
    kind : str
        Generator name (``"deblur1d"``, ``"deblur2d"``, ``"tomo"``, ``"dynamic_tomo"``).
    dims : tuple of int
        ``(n,)``, ``(nx, ny)`` or ``(nx, ny, nt)``.
    meta : dict
        Geometry, PSF and noise parameters; serialised by :func:`~regulus.testproblems.bundle.export_bundle`.
    """

    __test__ = False  # not a pytest class

    A: object
    A_data: object
    x_true: np.ndarray | None
    b_true: np.ndarray
    b: np.ndarray
    delta: float
    kind: str
    dims: tuple
    commit_crime: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.A.shape

    @property
    def image_shape(self):
        """``(nx, ny)`` of one frame, or ``None`` for signals."""
        if len(self.dims) >= 2:
            return tuple(self.dims[:2])
        return None

    def frames(self, x):
        """Reshape a stacked solution into ``(nt, nx, ny)`` images (``nt = 1`` for static problems)."""
        x = np.asarray(x, dtype=np.float64)
        if len(self.dims) == 1:
            return x.reshape(1, self.dims[0], 1)
        nx, ny = self.dims[:2]
        nt = self.dims[2] if len(self.dims) > 2 else 1
        return x.reshape(nt, ny, nx).transpose(0, 2, 1)
