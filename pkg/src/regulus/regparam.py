"""Regularization-parameter rules: discrepancy principle and GCV.

Every rule works on a :class:`ProjectedProblem`, which stores a Tikhonov
problem ``min ||E t - f||^2 + alpha ||L t||^2`` in spectral form

    t(alpha) = Z (c * fhat / (c**2 + alpha * s**2)),

so the residual, the trace of the influence matrix and their derivatives are
cheap to evaluate for any ``alpha``.  With ``L = I`` the pair ``(c, s)`` is
``(singular values of E, 1)``; otherwise it comes from a CS decomposition of
``[E; L]``.  Dense direct problems use the same representation built from an
SVD or GSVD of the full matrix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DpInfeasibleError, ParameterError

__all__ = [
    "ETA_DEFAULT",
    "RegSelector",
    "ProjectedProblem",
    "GcvDegenerateWarning",
    "dp_discrete",
    "dp_newton_tikhonov",
    "dp_bisection_tikhonov",
    "gcv_function",
    "gcv_continuous",
    "gcv_discrete_tsvd",
]

ETA_DEFAULT = 1.01
_KINDS = ("fixed", "dp", "gcv")
_VARIANTS = ("full", "projected")


class GcvDegenerateWarning(RuntimeWarning):
    """GCV was asked to minimise over an all-zero spectrum."""


@dataclass(frozen=True)
class RegSelector:
    """Parameter-choice policy.

    Parameters
    ----------
    kind : {"fixed", "dp", "gcv"}
    value : float, optional
        The fixed ``alpha`` (or truncation index ``h`` for TSVD/TGSVD).
    delta : float, optional
        Noise-norm estimate for the discrepancy principle.
    eta : float
        Safety factor, must exceed 1.
    variant : {"full", "projected"}, optional
        GCV flavour for projection methods; ``None`` lets the solver choose.
    """

    kind: str
    value: float | None = None
    delta: float | None = None
    eta: float = ETA_DEFAULT
    variant: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown selector kind {self.kind!r}; expected one of {_KINDS}")
        if not self.eta > 1.0 or not math.isfinite(self.eta):
            raise ParameterError(f"eta must be > 1, got {self.eta}")
        if self.delta is not None and not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ParameterError(f"delta must be finite and >= 0, got {self.delta}")
        if self.kind == "fixed":
            if self.value is None or not (self.value >= 0 and math.isfinite(self.value)):
                raise ParameterError(f"fixed selector needs a finite value >= 0, got {self.value}")
        if self.variant is not None and self.variant not in _VARIANTS:
            raise ParameterError(f"unknown GCV variant {self.variant!r}")

    @classmethod
    def fixed(cls, value):
        return cls("fixed", value=float(value))

    @classmethod
    def dp(cls, delta=None, eta=ETA_DEFAULT):
        return cls("dp", delta=None if delta is None else float(delta), eta=float(eta))

    @classmethod
    def gcv(cls, variant=None):
        return cls("gcv", variant=variant)

    @classmethod
    def parse(cls, spec):
        """Build a selector from a string (``"gcv"``, ``"dp"``, ``"0.1"``) or a mapping."""
        if isinstance(spec, RegSelector):
            return spec
        if spec is None:
            return None
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls.fixed(spec)
        if isinstance(spec, str):
            s = spec.strip().lower()
            if s in ("gcv", "dp"):
                return cls(s)
            try:
                return cls.fixed(float(s))
            except ValueError:
                raise ParameterError(f"cannot parse selector {spec!r}") from None
        if isinstance(spec, dict):
            d = dict(spec)
            kind = d.pop("kind", None)
            if kind is None:
                raise ParameterError("selector mapping needs a 'kind' field")
            allowed = {"value", "delta", "eta", "variant"}
            extra = set(d) - allowed
            if extra:
                raise ParameterError(f"unknown selector fields {sorted(extra)}")
            return cls(str(kind).lower(), **d)
        raise ParameterError(f"cannot parse selector {spec!r}")

    def with_delta(self, delta):
        """Return a copy with ``delta`` filled in if it was missing."""
        if self.kind != "dp" or self.delta is not None:
            return self
        return RegSelector("dp", value=self.value, delta=float(delta), eta=self.eta,
                           variant=self.variant)

    def require_delta(self):
        if self.delta is None:
            raise ParameterError("discrepancy principle needs a noise estimate delta")
        return self.eta * self.delta


class ProjectedProblem:
    """Tikhonov problem in spectral form; see the module docstring.

    Parameters
    ----------
    c, s : (r,) ndarray
        Spectral pairs; the filter of component ``i`` is
        ``c_i**2 / (c_i**2 + alpha s_i**2)``.
    fhat : (r,) ndarray
        Data coefficients.
    Z : (d, r) ndarray
        Maps coefficients to the solution.
    rest2 : float
        Squared data norm not captured by ``fhat`` inside the projected space.
    outside2 : float
        Squared data norm lost by the projection; enters only the "full"
        discrepancy and GCV numerator.
    m : int
        Rows of the ambient problem.
    d : int
        Dimension of the projected solution space.
    flavor : str
        ``"hybrid"`` (Krylov, ``d+1`` rows), ``"gks"`` or ``"direct"``.
    """

    def __init__(self, c, s, fhat, Z, rest2, outside2, m, d, flavor):
        self.c = np.asarray(c, dtype=np.float64)
        self.s = np.asarray(s, dtype=np.float64)
        self.fhat = np.asarray(fhat, dtype=np.float64)
        self.Z = Z
        self.rest2 = max(float(rest2), 0.0)
        self.outside2 = max(float(outside2), 0.0)
        self.m = int(m)
        self.d = int(d)
        self.flavor = flavor
        self._active = self.s > 0

    @classmethod
    def from_matrix(cls, E, f, m, flavor="hybrid", L=None, outside_res2=0.0):
        """Spectral form of ``min ||E t - f||^2 + alpha ||L t||^2`` (``L=None`` means identity)."""
        from .factorizations import _cs_pair

        E = np.asarray(E, dtype=np.float64)
        f = np.asarray(f, dtype=np.float64).ravel()
        d = E.shape[1]
        f2 = float(f @ f)
        if L is None:
            U, g, Vt = np.linalg.svd(E, full_matrices=False)
            fhat = U.T @ f
            return cls(g, np.ones_like(g), fhat, Vt.T, f2 - float(fhat @ fhat), outside_res2,
                       m, d, flavor)
        L = np.asarray(L, dtype=np.float64)
        U, c, s, Z, _, _, _ = _cs_pair(E, L)
        fhat = U.T @ f
        return cls(c, s, fhat, Z, f2 - float(fhat @ fhat), outside_res2, m, d, flavor)

    @classmethod
    def from_svd(cls, sv, b):
        b = np.asarray(b, dtype=np.float64).ravel()
        fhat = sv.U.T @ b
        return cls(sv.s, np.ones_like(sv.s), fhat, sv.V, float(b @ b) - float(fhat @ fhat), 0.0,
                   sv.U.shape[0], sv.V.shape[0], "direct")

    @classmethod
    def from_gsvd(cls, g, b):
        b = np.asarray(b, dtype=np.float64).ravel()
        fhat = g.U.T @ b
        return cls(g.c, g.s, fhat, g.Yinv_T, float(b @ b) - float(fhat @ fhat), 0.0,
                   g.U.shape[0], g.Yinv_T.shape[0], "direct")

    @property
    def gamma(self):
        """Generalized singular values ``c/s`` of the alpha-dependent components."""
        return self.c[self._active] / self.s[self._active]

    @property
    def gamma_max(self):
        g = self.gamma
        return float(g.max()) if g.size else 0.0

    def filters(self, alpha):
        c2 = self.c**2
        den = c2 + alpha * self.s**2
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(den > 0, c2 / den, 0.0)
        return phi

    def coefficients(self, alpha):
        c = self.c
        den = c**2 + alpha * self.s**2
        cmax = float(np.abs(c).max()) if c.size else 0.0
        keep = den > (1e-14 * cmax) ** 2 if alpha == 0 else den > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(keep, c * self.fhat / np.where(keep, den, 1.0), 0.0)

    def solve(self, alpha):
        """Projected solution ``t(alpha)``."""
        return self.Z @ self.coefficients(alpha)

    def residual2(self, alpha, full=True):
        r = (1.0 - self.filters(alpha)) * self.fhat
        val = float(r @ r) + self.rest2
        return val + self.outside2 if full else val

    def residual_norm(self, alpha, full=True):
        return math.sqrt(self.residual2(alpha, full))

    def trace(self, alpha):
        return float(self.filters(alpha).sum())

    def limits(self, full=True):
        """Discrepancy as ``alpha -> infinity`` and ``alpha -> 0``."""
        a = self._active
        base = self.rest2 + (self.outside2 if full else 0.0)
        hi2 = base + float(self.fhat[a] @ self.fhat[a])
        zero = a & (self.c == 0)
        lo2 = base + float(self.fhat[zero] @ self.fhat[zero])
        return math.sqrt(hi2), math.sqrt(lo2)


def dp_discrete(residuals, delta, eta=ETA_DEFAULT):
    """Smallest 1-based index with ``residuals[i-1] <= eta*delta``, or ``None``."""
    r = np.asarray(residuals, dtype=np.float64).ravel()
    if r.size == 0:
        raise ParameterError("dp_discrete needs at least one residual")
    if not eta > 1.0:
        raise ParameterError(f"eta must be > 1, got {eta}")
    hit = np.nonzero(r <= eta * delta)[0]
    return int(hit[0]) + 1 if hit.size else None


def _dp_parts(problem, full):
    a = problem._active
    c2, s2 = problem.c[a] ** 2, problem.s[a] ** 2
    f2 = problem.fhat[a] ** 2
    const = problem.rest2 + (problem.outside2 if full else 0.0)
    return c2, s2, f2, const


def _dp_value(ah, c2, s2, f2, const):
    # squared discrepancy as a function of ahat = 1/alpha
    w = s2 / (ah * c2 + s2)
    return float((w * w) @ f2) + const


def _check_dp(problem, tau, full):
    hi, lo = problem.limits(full)
    if tau >= hi:
        raise DpInfeasibleError(f"eta*delta={tau:.6g} >= maximal discrepancy {hi:.6g}", side="upper")
    if tau <= lo * (1 + 1e-12):
        raise DpInfeasibleError(f"eta*delta={tau:.6g} <= minimal discrepancy {lo:.6g}", side="lower")


def _bracket_right(c2, s2, f2, const, tau2, ah):
    hi = max(ah, 1e-300) * 10.0
    for _ in range(700):
        if _dp_value(hi, c2, s2, f2, const) < tau2:
            return hi
        hi *= 10.0
    raise DpInfeasibleError("no upper bracket for the discrepancy root", side="lower")


def _log_bisect(c2, s2, f2, const, tau2, lo, hi, rtol):
    for _ in range(400):
        mid = math.sqrt(lo * hi) if lo > 0 else hi / 2
        if _dp_value(mid, c2, s2, f2, const) > tau2:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def dp_newton_tikhonov(problem, delta, eta=ETA_DEFAULT, full=True, ahat0=1e-12,
                       rtol=1e-10, maxiter=200):
    """Solve ``D(alpha) = eta*delta`` by Newton's method in ``ahat = 1/alpha``.

    The squared discrepancy is convex and decreasing in ``ahat``, so Newton
    iterates started left of the root increase monotonically to it.  The start
    is moved left until it lies left of the root; if Newton does not meet the
    tolerance within ``maxiter`` steps the root is finished by bisection in
    ``log(ahat)``.

    Returns
    -------
    alpha : float

    Raises
    ------
    DpInfeasibleError
        ``side="upper"`` when ``eta*delta`` is at least the discrepancy of the
        zero solution, ``side="lower"`` when it is at most the discrepancy of
        the unregularized projected solution.
    """
    tau = eta * delta
    _check_dp(problem, tau, full)
    c2, s2, f2, const = _dp_parts(problem, full)
    tau2 = tau * tau
    ah = float(ahat0)
    while _dp_value(ah, c2, s2, f2, const) <= tau2:
        ah *= 1e-3
        if ah < 1e-300:
            raise DpInfeasibleError("discrepancy root not bracketed", side="upper")
    lo = ah
    for _ in range(maxiter):
        D2 = _dp_value(ah, c2, s2, f2, const)
        if abs(math.sqrt(D2) - tau) <= rtol * tau:
            return 1.0 / ah
        if D2 > tau2:
            lo = max(lo, ah)
        den = ah * c2 + s2
        dF = float(-2.0 * ((s2 * s2 * c2 / den**3) @ f2))
        if not dF < 0.0:
            break
        ah_new = ah - (D2 - tau2) / dF
        if not ah_new > 0.0:
            break
        ah = ah_new
    hi = _bracket_right(c2, s2, f2, const, tau2, lo)
    ah = _log_bisect(c2, s2, f2, const, tau2, lo, hi, 1e-14)
    return 1.0 / ah


def dp_bisection_tikhonov(problem, delta, eta=ETA_DEFAULT, full=True, rtol=1e-14):
    """Bisection in ``log(1/alpha)`` for the discrepancy equation (reference implementation)."""
    tau = eta * delta
    _check_dp(problem, tau, full)
    c2, s2, f2, const = _dp_parts(problem, full)
    tau2 = tau * tau
    lo = 1.0
    while _dp_value(lo, c2, s2, f2, const) <= tau2:
        lo *= 1e-2
    hi = _bracket_right(c2, s2, f2, const, tau2, lo)
    return 1.0 / _log_bisect(c2, s2, f2, const, tau2, lo, hi, rtol)


def _zeta(problem, variant):
    if variant == "full":
        return float(problem.m)
    if problem.flavor == "hybrid":
        return float(problem.d + 1)
    return float(problem.d)


def gcv_function(problem, alpha, variant="full", zeta=None):
    """GCV value ``residual^2 / (zeta - trace)^2``.

    ``zeta`` defaults to ``m`` for the full variant, ``d+1`` for projected
    Krylov problems and ``d`` for projected GKS problems.
    """
    z = _zeta(problem, variant) if zeta is None else float(zeta)
    num = problem.residual2(alpha, full=(variant == "full"))
    den = (z - problem.trace(alpha)) ** 2
    return num / den if den > 0 else math.inf


def gcv_continuous(problem, variant="full", zeta=None, npoints=60, lo=1e-12, hi=1e2, rtol=1e-3):
    """Minimise the GCV function over ``alpha``.

    A logarithmic grid of ``npoints`` values spanning ``[lo, hi] * gamma_1**2``
    locates the best cell, which is refined by golden-section search in
    ``log(alpha)`` to relative accuracy ``rtol``.
    """
    g1 = problem.gamma_max
    if not g1 > 0:
        warnings.warn("GCV on an all-zero spectrum; returning the grid endpoint",
                      GcvDegenerateWarning, stacklevel=2)
        return lo
    scale = g1 * g1
    grid = np.logspace(math.log10(lo), math.log10(hi), npoints) * scale
    vals = np.array([gcv_function(problem, a, variant, zeta) for a in grid])
    if not np.any(np.isfinite(vals)):
        warnings.warn("GCV is undefined on the whole grid", GcvDegenerateWarning, stacklevel=2)
        return float(grid[0])
    i = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.inf)))
    a = math.log(grid[max(i - 1, 0)])
    b = math.log(grid[min(i + 1, npoints - 1)])

    def G(la):
        return gcv_function(problem, math.exp(la), variant, zeta)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    g1v, g2v = G(x1), G(x2)
    tol = math.log1p(rtol)
    while b - a > tol:
        if g1v <= g2v:
            b, x2, g2v = x2, x1, g1v
            x1 = b - invphi * (b - a)
            g1v = G(x1)
        else:
            a, x1, g1v = x1, x2, g2v
            x2 = a + invphi * (b - a)
            g2v = G(x2)
    best = 0.5 * (a + b)
    # never return something worse than the best grid point
    if G(best) > vals[i]:
        return float(grid[i])
    return float(math.exp(best))


def gcv_discrete_tsvd(sv, b, m=None):
    """Truncation index minimising ``||A x_h - b||^2 / (m - h)^2`` over ``h = 1..n-1``.

    The search stops at the numerical rank (``s_h > 1e-14 s_1``).
    """
    b = np.asarray(b, dtype=np.float64).ravel()
    m = sv.U.shape[0] if m is None else int(m)
    beta = sv.U.T @ b
    outside = max(float(b @ b) - float(beta @ beta), 0.0)
    n = sv.s.size
    rank = int(np.sum(sv.s > 1e-14 * sv.s[0])) if n and sv.s[0] > 0 else 0
    hmax = min(n - 1, rank) if n > 1 else 1
    hmax = max(hmax, 1)
    tail = np.concatenate([np.cumsum((beta**2)[::-1])[::-1], [0.0]])  # tail[h] = sum_{i>=h}
    best_h, best = 1, math.inf
    for h in range(1, hmax + 1):
        den = (m - h) ** 2
        if den == 0:
            continue
        G = (tail[h] + outside) / den
        if G < best:
            best_h, best = h, G
    return best_h
