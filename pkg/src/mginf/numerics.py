"""Adaptive Gauss-Kronrod quadrature.

``integrate`` is a globally adaptive 21-point Gauss-Kronrod scheme (the
QUADPACK QAG rule) whose error estimate is the plain difference between the
Kronrod and the embedded 10-point Gauss result, floored at a roundoff level.
``integrate_cumulative`` integrates onto a whole grid in one pass, which is
what the renewal curve needs.

Integrands must be vectorised: they receive a 1-d float array and return an
array of the same shape.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AccuracyError, DomainError, NumericError

__all__ = [
    "QuadratureResult",
    "CumulativeResult",
    "integrate",
    "integrate_cumulative",
    "truncation_horizon",
    "DEFAULT_ABS_TOL",
    "DEFAULT_REL_TOL",
]

DEFAULT_ABS_TOL = 1e-10
DEFAULT_REL_TOL = 1e-10

_EPS = np.finfo(float).eps

# 21-point Kronrod abscissae (positive half, descending) and weights; the odd
# indices are the 10-point Gauss nodes.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208932185396,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# full 21-node rule on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]

_MIN_WIDTH = 64 * _EPS


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __iter__(self):
        return iter((self.value, self.abs_error_estimate))


@dataclass(frozen=True)
class CumulativeResult:
    """Running integrals ``F(t_i)`` with accumulated error estimates."""

    grid: np.ndarray
    values: np.ndarray
    abs_error: np.ndarray
    evaluations: int


def _gk21(f, a: np.ndarray, b: np.ndarray):
    """Apply the rule to intervals ``[a_i, b_i]`` in one integrand call."""
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    x = center[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        i, j = np.argwhere(~np.isfinite(fx))[0]
        raise NumericError(f"integrand is not finite at t={x[i, j]!r}", abscissa=float(x[i, j]))
    kron = half * (fx @ _KW)
    gauss = half * (fx @ _GW)
    resabs = np.abs(half) * (np.abs(fx) @ _KW)
    # QUADPACK's scaling of |K - G|: pessimistic for kinks, sharp for smooth f
    resasc = np.abs(half) * (np.abs(fx - (kron / np.where(half == 0, 1, 2 * half))[:, None]) @ _KW)
    diff = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200 * diff / resasc) ** 1.5), diff)
    err = np.maximum(scaled, 50 * _EPS * resabs)
    return kron, err, resabs, x.size


def _split(a: float, b: float, points) -> np.ndarray:
    inner = sorted(p for p in (points or ()) if a < p < b)
    return np.array([a, *inner, b], dtype=float)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    abs_tol: float = DEFAULT_ABS_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    points: Sequence[float] | None = None,
    limit: int = 2000,
) -> QuadratureResult:
    """Integrate ``f`` over ``[a, b]`` to ``max(abs_tol, rel_tol * |value|)``.

    Parameters
    ----------
    f : callable
        Vectorised integrand.
    a, b : float
        Finite limits with ``a <= b``.
    abs_tol, rel_tol : float
        Positive tolerances.
    points : sequence of float, optional
        Known discontinuities or kinks; the interval is split there first.
    limit : int
        Maximum number of subintervals before giving up.

    Raises
    ------
    NumericError
        ``f`` produced a non-finite value (the abscissa is attached).
    AccuracyError
        The subdivision limit was reached; the best estimate is attached.
    """
    if not (np.isfinite(a) and np.isfinite(b)) or a > b:
        raise DomainError(f"integration limits must be finite with a <= b, got [{a}, {b}]")
    if abs_tol <= 0 or rel_tol <= 0:
        raise DomainError("tolerances must be > 0")
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)

    edges = _split(a, b, points)
    val, err, resabs, nev = _gk21(f, edges[:-1], edges[1:])
    heap = [(-e, lo, hi, v, r) for lo, hi, v, e, r in zip(edges[:-1], edges[1:], val, err, resabs)]
    heapq.heapify(heap)
    total, total_err = float(val.sum()), float(err.sum())

    frozen = []  # intervals at the roundoff floor or too narrow to bisect
    while total_err > max(abs_tol, rel_tol * abs(total)) and heap:
        if len(heap) + len(frozen) >= limit:
            raise AccuracyError(
                f"subdivision limit {limit} reached on [{a}, {b}]; estimate {total!r} +/- {total_err:.3g}",
                estimate=total,
                abs_error=total_err,
            )
        item = heapq.heappop(heap)
        neg_e, lo, hi, v, r = item
        mid = 0.5 * (lo + hi)
        if -neg_e <= 51 * _EPS * r or hi - lo <= _MIN_WIDTH * max(1.0, abs(mid)):
            frozen.append(item)
            continue
        vv, ee, rr, n = _gk21(f, np.array([lo, mid]), np.array([mid, hi]))
        nev += n
        total += float(vv.sum()) - v
        total_err += float(ee.sum()) + neg_e
        heapq.heappush(heap, (-ee[0], lo, mid, vv[0], rr[0]))
        heapq.heappush(heap, (-ee[1], mid, hi, vv[1], rr[1]))

    # re-sum to shed drift from incremental updates
    parts = heap + frozen
    total = float(sum(h[3] for h in parts))
    total_err = float(sum(-h[0] for h in parts))
    return QuadratureResult(total, total_err, nev)


def integrate_cumulative(
    f: Callable[[np.ndarray], np.ndarray],
    grid,
    abs_tol: float = DEFAULT_ABS_TOL,
    points: Sequence[float] | None = None,
    start: float = 0.0,
) -> CumulativeResult:
    """Return ``F(t_i) = int_start^{t_i} f`` for every point of an ascending grid.

    Panels between consecutive grid points are integrated once and
    accumulated.  Each panel receives a share of ``abs_tol`` proportional to
    its width, so the last value meets ``abs_tol`` overall.
    """
    t = np.asarray(grid, dtype=float).reshape(-1)
    if t.size == 0:
        return CumulativeResult(t, t.copy(), t.copy(), 0)
    if t[0] < start or np.any(np.diff(t) < 0):
        raise DomainError("grid must be ascending and start at or after the lower limit")
    if abs_tol <= 0:
        raise DomainError("abs_tol must be > 0")

    # sub-panels: grid panels further split at the breakpoints
    knots = np.concatenate([[start], t])
    extra = [p for p in (points or ()) if start < p < t[-1]]
    edges = np.unique(np.concatenate([knots, extra]))
    lo, hi = edges[:-1], edges[1:]
    span = t[-1] - start
    if lo.size == 0 or span == 0:
        return CumulativeResult(t, np.zeros_like(t), np.zeros_like(t), 0)
    tol = np.maximum(abs_tol * (hi - lo) / span, 1e-300)

    val, err, _, nev = _gk21(f, lo, hi)
    for i in np.flatnonzero(err > np.maximum(tol, 1e-15 * np.abs(val))):
        res = integrate(f, lo[i], hi[i], abs_tol=tol[i], rel_tol=1e-15)
        val[i], err[i] = res.value, res.abs_error_estimate
        nev += res.evaluations

    cum_val = np.concatenate([[0.0], np.cumsum(val)])
    cum_err = np.concatenate([[0.0], np.cumsum(err)])
    idx = np.searchsorted(edges, t)
    return CumulativeResult(t, cum_val[idx], cum_err[idx], nev)


def truncation_horizon(
    bound: Callable[[float], float],
    threshold: float,
    start: float,
    cap: float = 2.0**40,
) -> float:
    """Smallest ``start * 2**k`` at which ``bound`` drops below ``threshold``.

    ``bound(T)`` must bound the integrand on ``[T, inf)``.  Raises
    ``AccuracyError`` when the horizon would exceed ``cap * start``.
    """
    horizon = max(start, 1e-12)
    limit = horizon * cap
    while bound(horizon) >= threshold:
        horizon *= 2.0
        if horizon > limit:
            raise AccuracyError(
                f"truncation horizon exceeded {limit:.3g} before the integrand bound fell below {threshold:.3g}"
            )
    return horizon
