"""Solver configuration and result containers."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .regparam import RegSelector

__all__ = ["IterRecord", "SolveResult", "IterConfig", "HistoryRecorder"]

STOP_REASONS = ("dp_satisfied", "max_iters", "breakdown", "converged", "direct")


@dataclass(frozen=True)
class IterRecord:
    """One row of a solver history.

    ``regparam`` is the Tikhonov parameter of the step, the truncation index
    for TSVD/TGSVD, or ``None`` for purely iterative methods.
    """

    iteration: int
    residual_norm: float
    regparam: float | None = None
    relative_error: float | None = None
    wall_time: float = 0.0
    note: str = ""


@dataclass
class SolveResult:
    x: np.ndarray
    history: list
    stop_reason: str
    iterates: list | None = None
    info: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.history)

    @property
    def residual_norms(self):
        return np.array([r.residual_norm for r in self.history])

    @property
    def regparams(self):
        return np.array([np.nan if r.regparam is None else r.regparam for r in self.history])

    @property
    def relative_errors(self):
        return np.array([np.nan if r.relative_error is None else r.relative_error
                         for r in self.history])


@dataclass
class IterConfig:
    """Iteration budget, parameter rule and optional ground truth.

    Parameters
    ----------
    max_iters : int, optional
        Maximum number of iterations ``d*``; solvers default to
        ``min(100, m, n)`` and clip to ``min(m, n)``.
    selector : RegSelector, optional
        Stopping rule and/or inner parameter rule.
    x_true : ndarray, optional
        Ground truth for the relative-error history.
    keep_iterates : bool
        Store every iterate in ``SolveResult.iterates``.
    callback : callable, optional
        Called as ``callback(record, x)`` after every recorded iteration.
    """

    max_iters: int | None = None
    selector: RegSelector | None = None
    x_true: np.ndarray | None = None
    keep_iterates: bool = False
    callback: object = None

    def __post_init__(self):
        if self.max_iters is not None and int(self.max_iters) < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.selector is not None and not isinstance(self.selector, RegSelector):
            self.selector = RegSelector.parse(self.selector)

    def resolved_max_iters(self, m, n, cap=100):
        d = min(cap, m, n) if self.max_iters is None else int(self.max_iters)
        return max(1, min(d, m, n))


class HistoryRecorder:
    """Accumulate :class:`IterRecord` rows with wall-clock timestamps."""

    def __init__(self, x_true=None, keep_iterates=False, callback=None):
        self.callback = callback
        self.x_true = None if x_true is None else np.asarray(x_true, dtype=np.float64).ravel()
        self._xt_norm = None if self.x_true is None else float(np.linalg.norm(self.x_true))
        self.keep = keep_iterates
        self.history = []
        self.iterates = [] if keep_iterates else None
        self._t0 = time.perf_counter()

    def relerr(self, x):
        if self.x_true is None:
            return None
        err = float(np.linalg.norm(x - self.x_true))
        return err / self._xt_norm if self._xt_norm > 0 else err

    def record(self, iteration, x, residual_norm, regparam=None, note=""):
        rec = IterRecord(int(iteration), float(residual_norm),
                         None if regparam is None else float(regparam),
                         self.relerr(x), time.perf_counter() - self._t0, note)
        self.history.append(rec)
        if self.keep:
            self.iterates.append(np.array(x, copy=True))
        if self.callback is not None:
            self.callback(rec, x)
        return rec

    def result(self, x, stop_reason, **info):
        return SolveResult(x=x, history=self.history, stop_reason=stop_reason,
                           iterates=self.iterates, info=info)
