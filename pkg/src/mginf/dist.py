"""Service-time distributions and the M|G|inf queue model.

Every family exposes its CDF, the integrated tail ``int_0^t (1 - G)``, the
residual ``int_t^inf (1 - G)``, raw moments and an inverse-CDF sampler.
All of these accept scalars or numpy arrays.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np
from scipy.special import expm1, gammainc, gammaincc, gammaincinv, gammaln, log1p

from .errors import DomainError, ParseError, RangeError, UnsupportedOperationError

__all__ = [
    "ServiceDistribution",
    "Deterministic",
    "Power",
    "Exponential",
    "Ferreira",
    "Erlang",
    "HyperExponential",
    "Empirical",
    "QueueModel",
    "parse_dist",
    "load_empirical",
]


def _as_array(t, name="t"):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError(f"{name} must not be NaN")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0, got {t!r}")
    return arr


def _out(arr, like):
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(like) == 0:
        return float(arr)
    return arr


class ServiceDistribution(ABC):
    """A nonnegative service-time law with finite mean."""

    family: str = ""
    #: Families for which the renewal function has an explicit expression.
    has_closed_form: bool = False

    # -- per-family kernels, all vectorised over float arrays ----------------
    @abstractmethod
    def _cdf(self, t: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _integrated_tail(self, t: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _moment(self, r: int) -> float: ...

    @abstractmethod
    def _ppf(self, u: np.ndarray) -> np.ndarray: ...

    def _residual_tail(self, t: np.ndarray) -> np.ndarray:
        return np.maximum(self.mean - self._integrated_tail(t), 0.0)

    # -- public surface -------------------------------------------------------
    @property
    def mean(self) -> float:
        return self._moment(1)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where G is discontinuous or not smooth (quadrature hints)."""
        return ()

    def cdf(self, t):
        """G(t), right-continuous."""
        arr = _as_array(t)
        return _out(np.clip(self._cdf(arr), 0.0, 1.0), t)

    def sf(self, t):
        """Survival function 1 - G(t)."""
        arr = _as_array(t)
        return _out(np.clip(1.0 - self._cdf(arr), 0.0, 1.0), t)

    def integrated_tail(self, t):
        """Closed-form ``int_0^t (1 - G(v)) dv``."""
        arr = _as_array(t)
        return _out(self._integrated_tail(arr), t)

    def residual_tail(self, t):
        """``int_t^inf (1 - G(v)) dv``, computed without cancellation where possible."""
        arr = _as_array(t)
        return _out(self._residual_tail(arr), t)

    def moment(self, r: int) -> float:
        """Raw moment of order ``r`` in {1, 2, 3}."""
        if r not in (1, 2, 3):
            raise UnsupportedOperationError(f"moment order must be 1, 2 or 3, got {r!r}")
        return float(self._moment(r))

    def cv_squared(self) -> float:
        """Squared coefficient of variation (mu2 - mu1^2) / mu1^2."""
        m1 = self.moment(1)
        if m1 == 0:
            raise DomainError("coefficient of variation undefined for zero mean")
        return (self.moment(2) - m1 * m1) / (m1 * m1)

    def sample(self, u):
        """Inverse-CDF transform of uniform variates ``u`` in (0, 1)."""
        arr = np.asarray(u, dtype=float)
        if np.any(~((arr > 0) & (arr < 1))):
            raise DomainError(f"uniform variate must lie in (0, 1), got {u!r}")
        return _out(self._ppf(arr), u)

    def describe(self) -> str:
        return self.family


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    """Constant service time ``alpha``; ``alpha = 0`` gives null service."""

    alpha: float
    family: str = field(default="deterministic", init=False, repr=False)
    has_closed_form = True

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise RangeError(f"deterministic alpha must be >= 0, got {self.alpha}")

    @property
    def breakpoints(self):
        return (self.alpha,) if self.alpha > 0 else ()

    def _cdf(self, t):
        return (t >= self.alpha).astype(float)

    def _integrated_tail(self, t):
        return np.minimum(t, self.alpha)

    def _residual_tail(self, t):
        return np.maximum(self.alpha - t, 0.0)

    def _moment(self, r):
        return self.alpha**r

    def _ppf(self, u):
        return np.full_like(u, self.alpha)

    def describe(self):
        return f"det:alpha={self.alpha!r}"


@dataclass(frozen=True)
class Power(ServiceDistribution):
    """G(t) = t^c on [0, 1); ``c = 1`` is the uniform law."""

    c: float
    family: str = field(default="power", init=False, repr=False)
    has_closed_form = True

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise RangeError(f"power exponent c must be > 0, got {self.c}")
        if self.c < 1:
            warnings.warn(f"power exponent c={self.c} < 1 (density unbounded at 0)", stacklevel=3)

    @property
    def breakpoints(self):
        return (1.0,)

    def _cdf(self, t):
        return np.where(t < 1.0, np.power(np.minimum(t, 1.0), self.c), 1.0)

    def _integrated_tail(self, t):
        s = np.minimum(t, 1.0)
        return s - np.power(s, self.c + 1) / (self.c + 1)

    def _residual_tail(self, t):
        s = np.minimum(t, 1.0)
        # (1 - s) - (1 - s^{c+1}) / (c + 1), written to keep precision near s = 1
        return np.maximum((1 - s) - (1 - np.power(s, self.c + 1)) / (self.c + 1), 0.0)

    def _moment(self, r):
        return self.c / (self.c + r)

    def _ppf(self, u):
        return np.power(u, 1.0 / self.c)

    def describe(self):
        return f"power:c={self.c!r}"


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    """Exponential service with mean ``alpha``."""

    alpha: float
    family: str = field(default="exponential", init=False, repr=False)
    has_closed_form = True

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise RangeError(f"exponential mean must be > 0, got {self.alpha}")

    def _cdf(self, t):
        return -expm1(-t / self.alpha)

    def _integrated_tail(self, t):
        return -self.alpha * expm1(-t / self.alpha)

    def _residual_tail(self, t):
        return self.alpha * np.exp(-t / self.alpha)

    def _moment(self, r):
        return math.factorial(r) * self.alpha**r

    def _ppf(self, u):
        return -self.alpha * log1p(-u)

    def describe(self):
        return f"exp:mean={self.alpha!r}"


@dataclass(frozen=True)
class Ferreira(ServiceDistribution):
    """Service law whose emptiness probability is a shifted exponential.

    Defined through ``p00(t) = e^-rho + (1 - e^-rho) e^{-(lam + beta) t}``
    for the queue with arrival rate ``lam``; the mean is ``rho / lam``.
    G has an atom at 0 of mass ``1 - (1 - e^-rho)(lam + beta)/lam``.
    Valid for ``-lam < beta < lam / (e^rho - 1)``.

    The family is specified by p00, not by a direct CDF formula; G is
    derived as ``1 + p00' / (lam p00)``.
    """

    beta: float
    lam: float
    rho: float = 1.0
    family: str = field(default="ferreira", init=False, repr=False)
    has_closed_form = True

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise RangeError(f"ferreira family needs an arrival rate lambda > 0, got {self.lam}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise RangeError(f"ferreira rho must be > 0, got {self.rho}")
        hi = self.lam / math.expm1(self.rho)
        if not (-self.lam < self.beta < hi):
            raise RangeError(
                f"ferreira beta={self.beta} violates -lambda < beta < lambda/(e^rho - 1), "
                f"i.e. {-self.lam:.6g} < beta < {hi:.6g} for lambda={self.lam:g}, rho={self.rho:g}"
            )

    @property
    def rate(self) -> float:
        return self.lam + self.beta

    @property
    def atom(self) -> float:
        """Probability mass of G at 0."""
        return max(0.0, 1.0 - (-math.expm1(-self.rho)) * self.rate / self.lam)

    def _x(self, t):
        return np.exp(-self.rate * t)

    def _cdf(self, t):
        q = -math.expm1(-self.rho)
        x = self._x(t)
        return 1.0 - q * self.rate * x / (self.lam * (math.exp(-self.rho) + q * x))

    def _integrated_tail(self, t):
        # -(1/lam) ln p00(t); ln p00 = -rho + log1p((e^rho - 1) x)
        x = self._x(t)
        return (self.rho - log1p(math.expm1(self.rho) * x)) / self.lam

    def _residual_tail(self, t):
        return log1p(math.expm1(self.rho) * self._x(t)) / self.lam

    def _moment(self, r):
        # mu_r = -r! Li_r(-(e^rho - 1)) / (lam * rate^{r-1})
        z = math.expm1(self.rho)
        if r == 1:
            return self.rho / self.lam
        li = float(mpmath.polylog(r, -z))
        return -math.factorial(r) * li / (self.lam * self.rate ** (r - 1))

    def _ppf(self, u):
        q = -math.expm1(-self.rho)
        w = self.lam * (1.0 - u) / self.rate
        out = np.zeros_like(u)
        cont = w < q
        wc = w[cont]
        x = wc * math.exp(-self.rho) / (q * (1.0 - wc))
        out[cont] = -np.log(x) / self.rate
        return out

    def describe(self):
        return f"ferreira:beta={self.beta!r},rho={self.rho!r}"


@dataclass(frozen=True)
class Erlang(ServiceDistribution):
    """Erlang law with ``k`` phases and mean ``alpha``."""

    k: int
    alpha: float
    family: str = field(default="erlang", init=False, repr=False)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise RangeError(f"erlang k must be a positive integer, got {self.k}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise RangeError(f"erlang mean must be > 0, got {self.alpha}")

    @property
    def theta(self) -> float:
        return self.k / self.alpha

    def _cdf(self, t):
        return gammainc(self.k, self.theta * t)

    def _integrated_tail(self, t):
        x = self.theta * t
        return sum(gammainc(n + 1, x) for n in range(self.k)) / self.theta

    def _residual_tail(self, t):
        x = self.theta * t
        return sum(gammaincc(n + 1, x) for n in range(self.k)) / self.theta

    def _moment(self, r):
        return math.exp(gammaln(self.k + r) - gammaln(self.k)) / self.theta**r

    def _ppf(self, u):
        return gammaincinv(self.k, u) / self.theta

    def describe(self):
        return f"erlang:k={self.k},mean={self.alpha!r}"


@dataclass(frozen=True)
class HyperExponential(ServiceDistribution):
    """Finite mixture of exponentials with weights ``p`` and means ``means``."""

    p: tuple[float, ...]
    means: tuple[float, ...]
    family: str = field(default="hyperexponential", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "means", tuple(float(v) for v in self.means))
        if len(self.p) != len(self.means) or not self.p:
            raise RangeError("hyperexponential needs equally many weights and means")
        if any(w < 0 for w in self.p) or abs(sum(self.p) - 1.0) > 1e-12:
            raise RangeError(f"hyperexponential weights must be >= 0 and sum to 1, got {self.p}")
        if any(not (math.isfinite(m) and m > 0) for m in self.means):
            raise RangeError(f"hyperexponential means must be > 0, got {self.means}")

    def _cdf(self, t):
        return 1.0 - self._sf(t)

    def _sf(self, t):
        return sum(w * np.exp(-t / m) for w, m in zip(self.p, self.means))

    def _integrated_tail(self, t):
        return sum(-w * m * expm1(-t / m) for w, m in zip(self.p, self.means))

    def _residual_tail(self, t):
        return sum(w * m * np.exp(-t / m) for w, m in zip(self.p, self.means))

    def _moment(self, r):
        return math.factorial(r) * sum(w * m**r for w, m in zip(self.p, self.means))

    def _ppf(self, u):
        # Newton on log sf(t) = log(1 - u).  log sf is convex and decreasing,
        # and sf(t) >= exp(-t / min mean), so starting at -min_mean * log(1 - u)
        # (left of the root) the iterates increase monotonically to it.
        target = np.log1p(-u)
        t = -min(self.means) * target
        for _ in range(100):
            sf = self._sf(t)
            pdf = sum(w / m * np.exp(-t / m) for w, m in zip(self.p, self.means))
            step = (np.log(sf) - target) * sf / pdf
            t = t + np.maximum(step, 0.0)
            if np.all(step <= 1e-15 * t):
                break
        return t

    def describe(self):
        p = ";".join(repr(v) for v in self.p)
        m = ";".join(repr(v) for v in self.means)
        return f"hyperexp:p={p},means={m}"


@dataclass(frozen=True, eq=False)
class Empirical(ServiceDistribution):
    """Law induced by a sample: piecewise-linear CDF through ``(x_(i), i/n)``.

    G is 0 below the smallest observation, jumps to ``1/n`` there, and rises
    linearly by ``1/n`` between consecutive distinct observations (ties add
    jumps).  A single observation reproduces the deterministic law.  Moments
    are those of this induced law, so ``mean == integrated_tail(inf)``.
    """

    data: np.ndarray
    family: str = field(default="empirical", init=False, repr=False)

    def __post_init__(self):
        x = np.sort(np.asarray(self.data, dtype=float).reshape(-1))
        if x.size == 0:
            raise RangeError("empirical distribution needs at least one observation")
        if not np.all(np.isfinite(x)) or x[0] < 0:
            raise RangeError("empirical observations must be finite and >= 0")
        x.setflags(write=False)
        object.__setattr__(self, "data", x)
        knots, counts = np.unique(x, return_counts=True)
        n = x.size
        level = np.cumsum(counts) / n  # G at each distinct knot
        h = np.diff(knots)
        seg = h * (1.0 - level[:-1] - 0.5 / n)
        cum = np.concatenate([[knots[0]], knots[0] + np.cumsum(seg)])
        object.__setattr__(self, "_knots", knots)
        object.__setattr__(self, "_level", level)
        object.__setattr__(self, "_cum", cum)

    @property
    def breakpoints(self):
        return tuple(self._knots[:64])

    def _locate(self, t):
        j = np.searchsorted(self._knots, t, side="right") - 1
        return j

    def _cdf(self, t):
        k, lv, n = self._knots, self._level, self.data.size
        j = self._locate(t)
        out = np.zeros_like(t)
        inside = (j >= 0) & (j < k.size - 1)
        ji = j[inside]
        out[inside] = lv[ji] + (t[inside] - k[ji]) / (k[ji + 1] - k[ji]) / n
        out[j >= k.size - 1] = 1.0
        return out

    def _integrated_tail(self, t):
        k, lv, n = self._knots, self._level, self.data.size
        j = self._locate(t)
        out = np.where(j < 0, t, 0.0)
        inside = (j >= 0) & (j < k.size - 1)
        ji = j[inside]
        d = t[inside] - k[ji]
        slope = 1.0 / ((k[ji + 1] - k[ji]) * n)
        out[inside] = self._cum[ji] + d * (1.0 - lv[ji]) - 0.5 * slope * d * d
        out[j >= k.size - 1] = self._cum[-1]
        return out

    def _moment(self, r):
        x, n = self.data, self.data.size
        total = x[0] ** r
        a, b = x[:-1], x[1:]
        h = b - a
        with np.errstate(invalid="ignore", divide="ignore"):
            seg = np.where(h > 0, (b ** (r + 1) - a ** (r + 1)) / ((r + 1) * np.where(h > 0, h, 1.0)), a**r)
        return float((total + seg.sum()) / n)

    @property
    def mean(self):
        return float(self._cum[-1])

    def _ppf(self, u):
        x, n = self.data, self.data.size
        k = np.ceil(u * n).astype(int) - 1
        k = np.clip(k, 0, n - 1)
        frac = u * n - k
        out = np.empty_like(u)
        first = k == 0
        out[first] = x[0]
        kk = k[~first]
        out[~first] = x[kk - 1] + frac[~first] * (x[kk] - x[kk - 1])
        return out

    def describe(self):
        return f"empirical:n={self.data.size}"


@dataclass(frozen=True)
class QueueModel:
    """Poisson arrivals at rate ``lam`` served by infinitely many servers."""

    lam: float
    service: ServiceDistribution

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise RangeError(f"arrival rate lambda must be > 0, got {self.lam}")
        if isinstance(self.service, Ferreira) and not math.isclose(self.service.lam, self.lam):
            raise RangeError(
                f"ferreira service was built for lambda={self.service.lam}, queue has lambda={self.lam}"
            )

    @property
    def alpha(self) -> float:
        return self.service.mean

    @property
    def rho(self) -> float:
        return self.lam * self.service.mean


# -- spec mini-language -------------------------------------------------------

_FAMILY_KEYS = {
    "det": ({"alpha"}, set()),
    "power": ({"c"}, set()),
    "exp": ({"mean"}, set()),
    "ferreira": ({"beta"}, {"rho"}),
    "erlang": ({"k", "mean"}, set()),
    "hyperexp": ({"p", "means"}, set()),
    "empirical": ({"file"}, set()),
}

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^,]*)")


def _number(text, spec, pos):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text.strip()!r}", spec, pos) from None


def _number_list(text, spec, pos):
    parts = text.split(";")
    out, offset = [], pos
    for part in parts:
        out.append(_number(part, spec, offset))
        offset += len(part) + 1
    return out


def load_empirical(path) -> Empirical:
    """Read one nonnegative service time per line; a non-numeric first line is a header."""
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 0:
                    continue
                raise ParseError(f"{path}:{lineno + 1}: not a number: {row[0]!r}") from None
    return Empirical(np.array(values))


def parse_dist(spec: str, lam: float | None = None) -> ServiceDistribution:
    """Build a distribution from ``family:key=value[,key=value...]``.

    List values use ``;`` separators.  The ``ferreira`` family needs the
    arrival rate ``lam`` of the queue it will serve.

    >>> parse_dist("det:alpha=1")
    Deterministic(alpha=1.0)
    """
    if ":" not in spec:
        raise ParseError("missing ':' after family name", spec, len(spec))
    fam, _, body = spec.partition(":")
    fam = fam.strip().lower()
    if fam not in _FAMILY_KEYS:
        raise ParseError(f"unknown family {fam!r}; expected one of {sorted(_FAMILY_KEYS)}", spec, 0)
    required, optional = _FAMILY_KEYS[fam]
    base = len(fam) + 1
    kv: dict[str, tuple[str, int]] = {}
    pos = 0
    while pos < len(body):
        m = _TOKEN.match(body, pos)
        if not m:
            raise ParseError("expected key=value", spec, base + pos)
        key = m.group(1)
        if key not in required | optional:
            raise ParseError(f"unknown key {key!r} for family {fam!r}", spec, base + m.start(1))
        if key in kv:
            raise ParseError(f"duplicate key {key!r}", spec, base + m.start(1))
        kv[key] = (m.group(2), base + m.start(2))
        pos = m.end()
        if pos < len(body):
            if body[pos] != ",":
                raise ParseError("expected ','", spec, base + pos)
            pos += 1
            if pos == len(body):
                raise ParseError("trailing ','", spec, base + pos)
    missing = required - kv.keys()
    if missing:
        raise ParseError(f"family {fam!r} is missing key(s) {sorted(missing)}", spec, len(spec))

    def num(key):
        return _number(kv[key][0], spec, kv[key][1])

    if fam == "det":
        return Deterministic(num("alpha"))
    if fam == "power":
        return Power(num("c"))
    if fam == "exp":
        return Exponential(num("mean"))
    if fam == "erlang":
        k = num("k")
        if k != int(k):
            raise ParseError("erlang k must be an integer", spec, kv["k"][1])
        return Erlang(int(k), num("mean"))
    if fam == "hyperexp":
        p = _number_list(kv["p"][0], spec, kv["p"][1])
        means = _number_list(kv["means"][0], spec, kv["means"][1])
        return HyperExponential(tuple(p), tuple(means))
    if fam == "ferreira":
        if lam is None:
            raise RangeError("ferreira family needs the queue arrival rate lambda")
        rho = num("rho") if "rho" in kv else 1.0
        return Ferreira(num("beta"), lam, rho)
    path = kv["file"][0].strip()
    if not Path(path).is_file():
        raise ParseError(f"empirical file not found: {path!r}", spec, kv["file"][1])
    return load_empirical(path)
