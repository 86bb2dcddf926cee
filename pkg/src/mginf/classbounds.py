"""Renewal-function bounds for reliability classes of service laws.

All bounds come from one mechanism: in

    R(t) = exp(-lam * A(t)) + lam * int_0^t exp(-lam * A(u)) du,
    A(t) = int_0^t (1 - G),

replace ``A`` by the value implied by an envelope on the service tail.
R is decreasing in ``A``, so an envelope that under-estimates ``A`` gives an
upper bound on R and one that over-estimates it gives a lower bound.

Two kinds of envelope are supported:

``pointwise``
    ``e(v)`` is compared with ``1 - G(v)``; ``A`` becomes ``int_0^t e``.
``integrated``
    ``e(t)`` is compared with the residual ``int_t^inf (1 - G)``; ``A``
    becomes ``alpha - e(t)``.

Class membership is never assumed: ``envelope_premise_check`` scans the
premise inequality for a concrete distribution on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dist import ServiceDistribution
from .errors import DomainError
from .numerics import DEFAULT_ABS_TOL, integrate_cumulative

__all__ = [
    "TailEnvelope",
    "ClassBound",
    "PremiseReport",
    "renewal_from_envelope",
    "exponential_envelope",
    "nbue_upper",
    "nwue_lower",
    "dfr_envelope",
    "dfr_upper",
    "imrl_rate",
    "imrl_envelope",
    "imrl_lower",
    "envelope_premise_check",
]

KINDS = ("pointwise", "integrated")
DIRECTIONS = ("upper", "lower")


@dataclass(frozen=True)
class TailEnvelope:
    """Comparison function for the service tail.

    Attributes
    ----------
    kind : {"pointwise", "integrated"}
        What ``func`` is compared with, see module docstring.
    func : callable
        Vectorised envelope ``e(v) >= 0``.
    direction : {"upper", "lower"}
        Which side of R the substitution bounds.  For ``upper`` the premise
        is ``1 - G >= e`` (pointwise) or ``residual <= e`` (integrated);
        ``lower`` mirrors it.
    provenance : str
        ``nbue``, ``nwue``, ``dfr``, ``imrl`` or ``custom``.
    alpha : float, optional
        Mean service time, required for the integrated kind.
    cumulative : callable, optional
        Closed form of ``int_0^t e`` for the pointwise kind; otherwise it is
        integrated numerically.
    """

    kind: str
    func: Callable[[np.ndarray], np.ndarray]
    direction: str
    provenance: str = "custom"
    alpha: float | None = None
    cumulative: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"envelope kind must be one of {KINDS}, got {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise DomainError(f"envelope direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.kind == "integrated" and (self.alpha is None or self.alpha < 0):
            raise DomainError("integrated envelopes need the mean service time alpha >= 0")

    def busy_integral(self, t: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
        """The substitute for ``int_0^t (1 - G)`` and its error, on sorted ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "integrated":
            return self.alpha - self.func(t), np.zeros_like(t)
        if self.cumulative is not None:
            return self.cumulative(t), np.zeros_like(t)
        res = integrate_cumulative(self.func, t, abs_tol=tol)
        return res.values, res.abs_error


@dataclass(frozen=True)
class ClassBound:
    """Bound values on a grid together with what they bound."""

    grid: np.ndarray
    values: np.ndarray
    abs_error: np.ndarray
    direction: str
    provenance: str

    @property
    def label(self) -> str:
        return f"{self.direction} bound"


@dataclass(frozen=True)
class PremiseReport:
    """Grid points where the envelope inequality fails."""

    violations: np.ndarray
    max_violation: float
    grid_size: int

    @property
    def holds(self) -> bool:
        return self.violations.size == 0

    def certified(self, t) -> np.ndarray:
        """Mask of times ``t`` with no violation anywhere in ``[0, t]``.

        A bound at ``t`` substitutes the envelope over the whole prefix, so a
        violation at any earlier time voids it; passing at ``t`` alone is not
        enough.
        """
        t = np.asarray(t, dtype=float)
        if self.holds:
            return np.ones(t.shape, dtype=bool)
        return t < self.violations.min()

    def verdict(self) -> str:
        if self.holds:
            return "bound (premise verified on grid)"
        ts = ", ".join(f"{v:.6g}" for v in self.violations[:5])
        more = "" if self.violations.size <= 5 else f", ... ({self.violations.size} points)"
        return f"bound (premise VIOLATED at t={ts}{more}; max violation {self.max_violation:.3g})"


def _grid(t):
    arr = np.asarray(t, dtype=float).reshape(-1)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("times must be >= 0")
    return arr


def renewal_from_envelope(lam: float, env: TailEnvelope, t, tol: float = DEFAULT_ABS_TOL):
    """R(t) with ``int_0^t (1 - G)`` replaced by the envelope's value.

    Returns ``(values, abs_error)``; scalars for scalar ``t``.
    """
    if not lam > 0:
        raise DomainError(f"arrival rate must be > 0, got {lam}")
    arr = _grid(t)
    order = np.argsort(arr, kind="stable")
    ts = arr[order]
    busy, busy_err = env.busy_integral(ts, tol / (10 * lam))

    def p00(u):
        u = np.asarray(u, dtype=float)
        idx = np.argsort(u, kind="stable")
        a = np.empty_like(u)
        a[idx] = env.busy_integral(u[idx], tol / (10 * lam))[0]
        return np.exp(-lam * a)

    outer = integrate_cumulative(p00, ts, abs_tol=tol / lam)
    vals = np.exp(-lam * busy) + lam * outer.values
    err = lam * outer.abs_error + lam * busy_err
    out_v = np.empty_like(arr)
    out_e = np.empty_like(arr)
    out_v[order] = vals
    out_e[order] = err
    if np.ndim(t) == 0:
        return float(out_v[0]), float(out_e[0])
    return out_v, out_e


def exponential_envelope(alpha: float, direction: str, provenance: str) -> TailEnvelope:
    """Residual of the exponential law with mean ``alpha``: ``alpha e^{-t/alpha}``."""
    if not alpha > 0:
        raise DomainError(f"mean service time must be > 0, got {alpha}")
    return TailEnvelope(
        kind="integrated",
        func=lambda v: alpha * np.exp(-np.asarray(v, dtype=float) / alpha),
        direction=direction,
        provenance=provenance,
        alpha=alpha,
    )


def _bound(lam, env, t, tol):
    grid = _grid(t)
    vals, err = renewal_from_envelope(lam, env, grid, tol)
    return ClassBound(grid, vals, err, env.direction, env.provenance)


def nbue_upper(lam: float, alpha: float, t, tol: float = DEFAULT_ABS_TOL) -> ClassBound:
    """Upper bound on R for NBUE service with mean ``alpha``: R of exponential service."""
    return _bound(lam, exponential_envelope(alpha, "upper", "nbue"), t, tol)


def nwue_lower(lam: float, alpha: float, t, tol: float = DEFAULT_ABS_TOL) -> ClassBound:
    """Lower bound on R for NWUE service with mean ``alpha``: R of exponential service."""
    return _bound(lam, exponential_envelope(alpha, "lower", "nwue"), t, tol)


def dfr_envelope(alpha: float, gamma_sq: float) -> TailEnvelope:
    """Pointwise envelope ``exp(-(t/alpha)(gamma_sq + 1)/2)`` for DFR service."""
    if not alpha > 0:
        raise DomainError(f"mean service time must be > 0, got {alpha}")
    if not gamma_sq >= 0:
        raise DomainError(f"squared coefficient of variation must be >= 0, got {gamma_sq}")
    k = (gamma_sq + 1.0) / (2.0 * alpha)
    return TailEnvelope(
        kind="pointwise",
        func=lambda v: np.exp(-k * np.asarray(v, dtype=float)),
        direction="upper",
        provenance="dfr",
        alpha=alpha,
        cumulative=lambda v: -np.expm1(-k * np.asarray(v, dtype=float)) / k,
    )


def dfr_upper(lam: float, alpha: float, gamma_sq: float, t, tol: float = DEFAULT_ABS_TOL) -> ClassBound:
    """Upper bound on R for DFR service; equals the exponential R at ``gamma_sq = 1``."""
    return _bound(lam, dfr_envelope(alpha, gamma_sq), t, tol)


def imrl_rate(alpha: float, mu2: float, mu3: float) -> float:
    """Decay rate ``4 alpha^2 mu3 / (3 mu2^3)``; equals ``1/alpha`` at exponential moments."""
    if not (alpha > 0 and mu2 > 0 and mu3 > 0):
        raise DomainError("alpha, mu2 and mu3 must be > 0")
    return 4.0 * alpha**2 * mu3 / (3.0 * mu2**3)


def imrl_envelope(alpha: float, mu2: float, mu3: float, form: str = "rate") -> TailEnvelope:
    """Integrated envelope for IMRL service.

    ``form="rate"`` is ``alpha e^{-kappa t}`` with ``kappa`` from
    :func:`imrl_rate`.  ``form="shifted"`` is
    ``alpha exp(1 - 2 alpha mu3 / (3 mu2^2) - 2 alpha t / mu2)``, which starts
    below ``alpha`` and decays at rate ``2 alpha / mu2``.  Both reduce to the
    exponential residual at exponential moments.
    """
    if not (alpha > 0 and mu2 > 0 and mu3 > 0):
        raise DomainError("alpha, mu2 and mu3 must be > 0")
    if form == "rate":
        kappa = imrl_rate(alpha, mu2, mu3)
        pre = 1.0
    elif form == "shifted":
        kappa = 2.0 * alpha / mu2
        pre = math.exp(1.0 - 2.0 * alpha * mu3 / (3.0 * mu2**2))
    else:
        raise DomainError(f"form must be 'rate' or 'shifted', got {form!r}")
    return TailEnvelope(
        kind="integrated",
        func=lambda v: alpha * pre * np.exp(-kappa * np.asarray(v, dtype=float)),
        direction="lower",
        provenance="imrl",
        alpha=alpha,
    )


def imrl_lower(
    lam: float, alpha: float, mu2: float, mu3: float, t, tol: float = DEFAULT_ABS_TOL, form: str = "rate"
) -> ClassBound:
    """Lower bound on R for IMRL service from its first three moments.

    With the default form this is
    ``e^-rho exp(rho e^{-kappa t}) + lam e^-rho int_0^t exp(rho e^{-kappa u}) du``.
    """
    return _bound(lam, imrl_envelope(alpha, mu2, mu3, form), t, tol)


def envelope_premise_check(
    d: ServiceDistribution, env: TailEnvelope, grid, atol: float = 1e-12
) -> PremiseReport:
    """Scan the envelope inequality for ``d`` on ``grid``.

    Pointwise envelopes are compared with ``1 - G(t)``, integrated ones with
    ``int_t^inf (1 - G)``.  Differences within ``atol`` are not violations.
    """
    t = _grid(grid)
    if np.any(np.diff(t) < 0):
        raise DomainError("grid must be ascending")
    actual = d.sf(t) if env.kind == "pointwise" else d.residual_tail(t)
    e = np.asarray(env.func(t), dtype=float)
    want_tail_above = (env.kind == "pointwise") == (env.direction == "upper")
    gap = (e - actual) if want_tail_above else (actual - e)
    bad = gap > atol
    return PremiseReport(t[bad], float(gap[bad].max()) if bad.any() else 0.0, t.size)
