"""Busy-cycle renewal function of the M|G|inf queue.

Time origin is the start of a busy period.  With
``p00(t) = exp(-lam * int_0^t (1 - G))`` the probability that the system is
empty at ``t``, the expected number of busy periods starting in ``[0, t]``
(the one at the origin included) is::

    R(t) = p00(t) + lam * int_0^t p00(u) du

Deterministic, power, exponential and ferreira service have explicit
expressions; every family can go through quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expi

from .dist import (
    Deterministic,
    Exponential,
    Ferreira,
    Power,
    QueueModel,
)
from .errors import ConsistencyError, DomainError, UnsupportedOperationError
from .numerics import DEFAULT_ABS_TOL, integrate, integrate_cumulative, truncation_horizon

__all__ = [
    "RenewalCurve",
    "CycleMoments",
    "ElementaryBounds",
    "emptiness_probability",
    "renewal_value",
    "renewal_curve",
    "renewal_derivative",
    "cycle_mean",
    "cycle_second_moment",
    "asymptotic_intercept",
    "cycle_moments",
    "elementary_bounds",
    "emptiness_transform",
    "cycle_transform",
    "default_grid",
]

METHODS = ("auto", "closed", "quadrature")


@dataclass(frozen=True)
class RenewalCurve:
    """R(t) on a grid with the evaluation method and error bound per point."""

    grid: np.ndarray
    values: np.ndarray
    method: np.ndarray
    abs_error: np.ndarray

    def __len__(self):
        return self.grid.size


@dataclass(frozen=True)
class CycleMoments:
    mean: float
    second_moment: float
    variance: float
    intercept: float
    intercept_discrepancy: float
    tolerance: float


class ElementaryBounds(NamedTuple):
    tight_lo: float
    tight_hi: float
    coarse_lo: float
    coarse_hi: float


def _times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"time must be >= 0, got {t!r}")
    return arr


def _scalar_or_array(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def emptiness_probability(m: QueueModel, t):
    """p00(t), the probability of an empty system at ``t`` starting empty."""
    arr = _times(t)
    return _scalar_or_array(np.exp(-m.lam * m.service.integrated_tail(arr)), t)


def _excess_emptiness(m: QueueModel, t):
    """p00(t) - e^-rho, evaluated from the residual tail without cancellation."""
    return math.exp(-m.rho) * np.expm1(m.lam * m.service.residual_tail(t))


# -- closed forms --------------------------------------------------------------


def _closed_deterministic(m, t):
    a = m.service.alpha
    return np.where(t < a, 1.0, 1.0 + m.lam * math.exp(-m.rho) * (t - a)), np.zeros_like(t)


def _closed_ferreira(m, t):
    d = m.service
    lam, beta, rho = m.lam, d.beta, d.rho
    q = -math.expm1(-rho)
    g = lam + beta
    val = math.exp(-rho) * (1 + lam * t) + q * beta / g * np.exp(-g * t) + q * lam / g
    return val, np.zeros_like(t)


def _ei_shifted(rho, t, alpha):
    """Ei(rho * e^{-t/alpha}) without underflow at large t."""
    y = rho * np.exp(-t / alpha)
    small = y < 1e-8
    out = np.empty_like(t)
    out[~small] = expi(y[~small])
    out[small] = np.euler_gamma + math.log(rho) - t[small] / alpha + y[small]
    return out


def _closed_exponential(m, t):
    # int_0^t exp(rho e^{-u/alpha}) du = alpha (Ei(rho) - Ei(rho e^{-t/alpha}))
    a, rho = m.service.alpha, m.rho
    x = np.exp(-t / a)
    inner = a * (expi(rho) - _ei_shifted(rho, t, a))
    val = np.exp(-rho * (1 - x)) + m.lam * math.exp(-rho) * inner
    return val, np.zeros_like(t)


def _closed_power(m, t, tol):
    c, lam, rho = m.service.c, m.lam, m.rho

    def f(u):
        return np.exp(-lam * (u - u ** (c + 1) / (c + 1)))

    s = np.minimum(t, 1.0)
    order = np.argsort(s, kind="stable")
    cum = integrate_cumulative(f, s[order], abs_tol=tol / lam)
    head = np.empty_like(s)
    err = np.empty_like(s)
    head[order] = cum.values
    err[order] = cum.abs_error
    below = np.exp(-lam * (s - s ** (c + 1) / (c + 1))) + lam * head
    above = math.exp(-rho) + lam * head + lam * math.exp(-rho) * (t - 1.0)
    return np.where(t <= 1.0, below, above), lam * err


def _closed(m: QueueModel, t: np.ndarray, tol: float):
    d = m.service
    if isinstance(d, Deterministic):
        return _closed_deterministic(m, t)
    if isinstance(d, Ferreira):
        return _closed_ferreira(m, t)
    if isinstance(d, Exponential):
        return _closed_exponential(m, t)
    if isinstance(d, Power):
        return _closed_power(m, t, tol)
    raise UnsupportedOperationError(f"no closed form for the {d.family} family")


def _quadrature(m: QueueModel, t: np.ndarray, tol: float):
    order = np.argsort(t, kind="stable")
    cum = integrate_cumulative(
        lambda u: np.exp(-m.lam * m.service.integrated_tail(u)),
        t[order],
        abs_tol=tol / m.lam,
        points=m.service.breakpoints,
    )
    integral = np.empty_like(t)
    err = np.empty_like(t)
    integral[order] = cum.values
    err[order] = cum.abs_error
    p00 = np.exp(-m.lam * m.service.integrated_tail(t))
    return p00 + m.lam * integral, m.lam * err


def _resolve(m: QueueModel, method: str) -> str:
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    if method == "auto":
        return "closed" if m.service.has_closed_form else "quadrature"
    if method == "closed" and not m.service.has_closed_form:
        raise UnsupportedOperationError(f"no closed form for the {m.service.family} family")
    return method


def renewal_value(m: QueueModel, t: float, method: str = "auto", tol: float = DEFAULT_ABS_TOL):
    """R(t) and an absolute error bound.

    ``auto`` uses the explicit expression when the family has one; the
    quadrature route integrates ``p00`` adaptively.  Closed forms report an
    error of 0 except the power family, whose expression still contains one
    integral.
    """
    t = float(_times(t))
    how = _resolve(m, method)
    if how == "closed":
        val, err = _closed(m, np.array([t]), tol)
        return float(val[0]), float(err[0])
    res = integrate(
        lambda u: np.exp(-m.lam * m.service.integrated_tail(u)),
        0.0,
        t,
        abs_tol=tol / m.lam,
        rel_tol=tol,
        points=m.service.breakpoints,
    )
    p00 = math.exp(-m.lam * m.service.integrated_tail(t))
    return p00 + m.lam * res.value, m.lam * res.abs_error_estimate


def default_grid(m: QueueModel, steps: int = 512) -> np.ndarray:
    """0 to ten mean cycle lengths in ``steps`` equal steps."""
    return np.linspace(0.0, 10.0 * cycle_mean(m), steps + 1)


def renewal_curve(m: QueueModel, grid=None, method: str = "auto", tol: float = DEFAULT_ABS_TOL) -> RenewalCurve:
    """R(t) over an ascending grid, computed in a single pass."""
    t = default_grid(m) if grid is None else _times(grid).reshape(-1)
    if np.any(np.diff(t) < 0):
        raise DomainError("grid must be ascending")
    how = _resolve(m, method)
    if t.size == 0:
        empty = np.empty(0)
        return RenewalCurve(empty, empty, np.empty(0, dtype=object), empty)
    if how == "closed":
        val, err = _closed(m, t, tol)
    else:
        val, err = _quadrature(m, t, tol)
    return RenewalCurve(t, np.asarray(val, dtype=float), np.full(t.size, how, dtype=object), err)


def renewal_derivative(m: QueueModel, t):
    """dR/dt = lam * G(t) * p00(t); right limit at atoms of G."""
    arr = _times(t)
    val = m.lam * m.service.cdf(arr) * np.exp(-m.lam * m.service.integrated_tail(arr))
    return _scalar_or_array(val, t)


def cycle_mean(m: QueueModel) -> float:
    """E[Z] = e^rho / lam."""
    return math.exp(m.rho) / m.lam


def _horizon(m: QueueModel, threshold: float, decay: float = 0.0) -> float:
    d = m.service
    start = max(4.0 * d.mean, *(d.breakpoints or (0.0,)), 1e-3 / m.lam)

    def bound(T):
        return math.exp(-decay * T) * float(_excess_emptiness(m, np.array([T]))[0])

    return truncation_horizon(bound, threshold, start)


def _excess_integral(m: QueueModel, abs_tol: float, rel_tol: float, direct: bool):
    """int_0^inf (p00 - e^-rho) dt.

    ``direct=False`` subtracts e^-rho from p00 built from the integrated
    tail; ``direct=True`` uses e^-rho * expm1(lam * residual tail).
    """
    if m.rho == 0:
        return 0.0, 0.0
    T = _horizon(m, abs_tol / 10)
    if direct:
        f = lambda u: _excess_emptiness(m, u)  # noqa: E731
    else:
        f = lambda u: np.exp(-m.lam * m.service.integrated_tail(u)) - math.exp(-m.rho)  # noqa: E731
    res = integrate(f, 0.0, T, abs_tol=abs_tol, rel_tol=rel_tol, points=m.service.breakpoints)
    return res.value, res.abs_error_estimate + abs_tol / 10


def cycle_second_moment(m: QueueModel, tol: float = DEFAULT_ABS_TOL) -> float:
    """E[Z^2] = 2 e^{2 rho} / lam * int_0^inf (p00 - e^-rho) + 2 e^rho / lam^2."""
    scale = 2.0 * math.exp(2 * m.rho) / m.lam
    excess, _ = _excess_integral(m, tol / scale, tol, direct=False)
    return scale * excess + 2.0 * math.exp(m.rho) / m.lam**2


def asymptotic_intercept(m: QueueModel, tol: float = DEFAULT_ABS_TOL):
    """lim R(t) - t / E[Z], by the moment route and the direct route.

    Returns ``(intercept, discrepancy)`` where ``intercept`` is
    ``E[Z^2] / (2 E[Z]^2)`` and ``discrepancy`` its absolute difference from
    ``e^-rho + lam e^-rho int_0^inf (exp(lam int_u^inf (1-G)) - 1) du``.

    Raises
    ------
    ConsistencyError
        If the two routes differ by more than ``100 * tol``.
    """
    ez = cycle_mean(m)
    # moment route accurate to tol in the intercept
    ez2 = cycle_second_moment(m, tol * 2 * ez * ez)
    moment_route = ez2 / (2 * ez * ez)
    w = m.lam * math.exp(-m.rho)
    excess, _ = _excess_integral(m, tol / w, tol, direct=True)
    # int (e^{lam r(u)} - 1) = e^rho * int (p00 - e^-rho)
    direct_route = math.exp(-m.rho) + w * math.exp(m.rho) * excess
    gap = abs(moment_route - direct_route)
    if gap > 100 * tol:
        raise ConsistencyError(
            f"intercept routes disagree: moment {moment_route!r} vs direct {direct_route!r} (gap {gap:.3g})"
        )
    return moment_route, gap


def cycle_moments(m: QueueModel, tol: float = DEFAULT_ABS_TOL) -> CycleMoments:
    """E[Z], E[Z^2], Var[Z] and the asymptotic intercept in one record."""
    ez = cycle_mean(m)
    ez2 = cycle_second_moment(m, tol)
    icpt, gap = asymptotic_intercept(m, tol)
    return CycleMoments(
        mean=ez,
        second_moment=ez2,
        variance=ez2 - ez * ez,
        intercept=icpt,
        intercept_discrepancy=gap,
        tolerance=tol,
    )


def elementary_bounds(m: QueueModel, t) -> ElementaryBounds:
    """Sandwich bounds from e^-rho <= p00 <= 1.

    ``p00 + lam e^-rho t <= R <= p00 + lam t`` (tight) and
    ``e^-rho (1 + lam t) <= R <= 1 + lam t`` (coarse).
    """
    arr = _times(t)
    p00 = np.exp(-m.lam * m.service.integrated_tail(arr))
    er = math.exp(-m.rho)
    out = (
        p00 + m.lam * er * arr,
        p00 + m.lam * arr,
        er * (1 + m.lam * arr),
        1 + m.lam * arr,
    )
    return ElementaryBounds(*(_scalar_or_array(v, t) for v in out))


def emptiness_transform(m: QueueModel, s: float, tol: float = DEFAULT_ABS_TOL) -> float:
    """Laplace transform of p00 at ``s > 0``.

    The constant part e^-rho is transformed exactly; the decaying excess is
    integrated up to a horizon where its bound falls below ``tol / 10``.
    """
    if not s > 0:
        raise DomainError(f"transform argument must be > 0, got {s}")
    const = math.exp(-m.rho) / s
    if m.rho == 0:
        return const
    T = _horizon(m, tol / 10, decay=s)
    res = integrate(
        lambda u: np.exp(-s * u) * _excess_emptiness(m, u),
        0.0,
        T,
        abs_tol=tol,
        rel_tol=tol,
        points=m.service.breakpoints,
    )
    return res.value + const


def cycle_transform(m: QueueModel, s: float, tol: float = DEFAULT_ABS_TOL) -> float:
    """Laplace transform of the busy-cycle length: 1 - 1/((s + lam) P00(s))."""
    return 1.0 - 1.0 / ((s + m.lam) * emptiness_transform(m, s, tol))
