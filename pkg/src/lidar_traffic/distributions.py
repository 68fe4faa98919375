"""Parametric size-distribution families.

Fifteen families are supported, named and parameterized the way MATLAB's
``fitdist`` names them (``TLocationScale``, ``Nakagami``, ...), because the
published model tables use those names.  Every family exposes a vectorized
density, CDF, quantile function and a maximum-likelihood fit.

Parameters travel as plain ``dict`` objects keyed by parameter name, e.g.
``{"mu": 197.54, "sigma": 8.96}``; a sequence in canonical order is accepted
wherever a mapping is.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import (
    DegenerateSample,
    EmptySample,
    FitFailed,
    InvalidParams,
    ProbabilityOutOfRange,
    SupportViolation,
)

EULER_GAMMA = 0.5772156649015329


class Family(str, enum.Enum):
    BirnbaumSaunders = "BirnbaumSaunders"
    ExtremeValue = "ExtremeValue"
    Gamma = "Gamma"
    GeneralizedExtremeValue = "GeneralizedExtremeValue"
    HalfNormal = "HalfNormal"
    InverseGaussian = "InverseGaussian"
    Logistic = "Logistic"
    Loglogistic = "Loglogistic"
    Lognormal = "Lognormal"
    Nakagami = "Nakagami"
    Normal = "Normal"
    Poisson = "Poisson"
    Rayleigh = "Rayleigh"
    TLocationScale = "TLocationScale"
    Weibull = "Weibull"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        """Look a family up by name, ignoring case."""
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower()
        for fam in cls:
            if fam.value.lower() == key:
                return fam
        raise InvalidParams(f"unknown distribution family {name!r}")


FAMILIES: tuple[Family, ...] = tuple(Family)

ParamsLike = Mapping[str, float] | Sequence[float]


# ---------------------------------------------------------------------------
# Samples and empirical CDF
# ---------------------------------------------------------------------------


class SampleSet:
    """An immutable, ascending-sorted sample of finite reals.

    Use :meth:`of_sizes` for frame-size data, which must be strictly positive.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.sort(np.asarray(values, dtype=float).ravel())
        if arr.size == 0:
            raise EmptySample("sample is empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidParams("sample contains non-finite values")
        arr.flags.writeable = False
        self.values = arr

    @classmethod
    def of_sizes(cls, values) -> "SampleSet":
        s = cls(values)
        if s.values[0] <= 0:
            raise SupportViolation("frame sizes must be strictly positive")
        return s

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"SampleSet(n={len(self)}, min={self.values[0]:g}, max={self.values[-1]:g})"


def as_sample(sample) -> SampleSet:
    return sample if isinstance(sample, SampleSet) else SampleSet(sample)


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF of a sample.

    ``points`` keeps every observation (duplicates included) in ascending
    order; the height at ``x`` is ``count(values <= x) / n``.
    """

    points: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size

    def __call__(self, x):
        return np.searchsorted(self.points, x, side="right") / self.n

    def left_limit(self, x):
        return np.searchsorted(self.points, x, side="left") / self.n

    def heights(self) -> np.ndarray:
        """ECDF height at each sample point, duplicates accumulated."""
        return self(self.points)


def ecdf(sample) -> Ecdf:
    if not isinstance(sample, SampleSet):
        values = np.asarray(sample, dtype=float).ravel()
        if values.size == 0:
            raise EmptySample("cannot build an ECDF from an empty sample")
        sample = SampleSet(values)
    return Ecdf(sample.values)


# ---------------------------------------------------------------------------
# Family implementations
# ---------------------------------------------------------------------------

LOCATION, SCALE, SHAPE = "location", "scale", "shape"


def _log(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(x)


class _Dist:
    """Vectorized math for one family; ``theta`` is a tuple in canonical order."""

    names: tuple[str, ...] = ()
    kinds: tuple[str, ...] = ()
    min_n = 2
    positive_support = False
    discrete = False

    def check(self, theta):
        for name, v in zip(self.names, theta):
            if not math.isfinite(v):
                raise InvalidParams(f"{name}={v} is not finite")
        self._check(theta)

    def _check(self, theta):
        pass

    def logpdf(self, x, theta):
        raise NotImplementedError

    def cdf(self, x, theta):
        raise NotImplementedError

    def ppf(self, u, theta):
        raise NotImplementedError

    def mean(self, theta):
        raise NotImplementedError

    def fit(self, x, start=None):
        raise NotImplementedError

    def check_support(self, x):
        if self.positive_support and x[0] <= 0:
            raise SupportViolation(f"{type(self).__name__} requires strictly positive data")

    def nll(self, x, theta):
        ll = self.logpdf(x, theta)
        return -float(np.sum(ll))


def _positive(name, v):
    if not v > 0:
        raise InvalidParams(f"{name} must be > 0, got {v}")


def _require_spread(x):
    if x[-1] == x[0]:
        raise DegenerateSample("all sample points are identical; scale estimate would be 0")


def _solve_gamma_shape(s):
    """Solve ln(a) - digamma(a) = s for the gamma shape a (s > 0)."""
    if not s > 0 or not math.isfinite(s):
        raise DegenerateSample("sample has no log-spread; gamma shape is unbounded")
    a = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(100):
        f = math.log(a) - special.digamma(a) - s
        fp = 1.0 / a - special.polygamma(1, a)
        step = f / fp
        a_new = a - step
        if a_new <= 0:
            a_new = a / 2.0
        if abs(a_new - a) <= 1e-14 * a:
            return a_new
        a = a_new
    return a


def _stalled_at_optimum(res, bounds, tol=1e-5):
    """Line search gave up where the projected gradient is already negligible."""
    g = getattr(res, "jac", None)
    if g is None or not np.all(np.isfinite(g)):
        return False
    g = np.array(g, dtype=float)
    for i, (lo, hi) in enumerate(bounds or []):
        # a coordinate pinned at a bound only counts if the gradient points outward
        if hi is not None and res.x[i] >= hi and g[i] < 0:
            g[i] = 0.0
        if lo is not None and res.x[i] <= lo and g[i] > 0:
            g[i] = 0.0
    return float(np.max(np.abs(g))) <= tol * max(1.0, abs(res.fun))


def _minimize(fun, x0, jac=True, bounds=None):
    """Quasi-Newton minimization with a Nelder-Mead fallback."""
    with np.errstate(all="ignore"):
        res = optimize.minimize(
            fun, x0, jac=jac, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10},
        )
        if np.isfinite(res.fun) and (res.success or _stalled_at_optimum(res, bounds)):
            return res.x, res.fun
        f = (lambda p: fun(p)[0]) if jac is True else fun
        res2 = optimize.minimize(
            f, res.x if np.all(np.isfinite(res.x)) else x0, method="Nelder-Mead",
            options={"maxiter": 400 * len(x0), "xatol": 1e-10, "fatol": 1e-13, "adaptive": True},
        )
    best = res2 if res2.fun <= res.fun or not np.isfinite(res.fun) else res
    if not np.isfinite(best.fun):
        raise FitFailed("optimizer did not reach a finite log-likelihood")
    return best.x, best.fun


class _BirnbaumSaunders(_Dist):
    names, kinds = ("beta", "gamma"), (SCALE, SHAPE)
    positive_support = True

    def _check(self, t):
        _positive("beta", t[0])
        _positive("gamma", t[1])

    def _eps(self, x, beta):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.sqrt(x / beta) - np.sqrt(beta / x)

    def logpdf(self, x, t):
        beta, gam = t
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                np.log(np.sqrt(x / beta) + np.sqrt(beta / x)) - np.log(2 * gam * x)
                - 0.5 * np.log(2 * np.pi) - 0.5 * (self._eps(x, beta) / gam) ** 2
            )
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.ndtr(self._eps(np.where(x > 0, x, 1.0), t[0]) / t[1]), 0.0)

    def ppf(self, u, t):
        beta, gam = t
        w = 0.5 * gam * special.ndtri(u)
        return beta * (w + np.sqrt(w * w + 1.0)) ** 2

    def mean(self, t):
        return t[0] * (1 + t[1] ** 2 / 2)

    def fit(self, x, start=None):
        _require_spread(x)
        s = float(np.mean(x))
        r = 1.0 / float(np.mean(1.0 / x))
        n = x.size

        def neg_profile(beta):
            g2 = s / beta + beta / r - 2.0
            if g2 <= 0:
                return np.inf
            return -(np.sum(np.log(x + beta)) - 0.5 * n * math.log(beta) - 0.5 * n * math.log(g2)) / n

        res = optimize.minimize_scalar(neg_profile, bounds=(r, s), method="bounded",
                                       options={"xatol": 1e-12 * s})
        beta = float(res.x)
        g2 = s / beta + beta / r - 2.0
        if not g2 > 0:
            raise FitFailed("Birnbaum-Saunders shape estimate is not positive")
        return beta, math.sqrt(g2)


class _ExtremeValue(_Dist):
    """Minimum-type Gumbel: F(x) = 1 - exp(-exp((x - mu)/sigma))."""

    names, kinds = ("mu", "sigma"), (LOCATION, SCALE)

    def _check(self, t):
        _positive("sigma", t[1])

    def logpdf(self, x, t):
        z = (np.asarray(x, dtype=float) - t[0]) / t[1]
        with np.errstate(over="ignore"):
            return z - np.exp(z) - math.log(t[1])

    def cdf(self, x, t):
        z = (np.asarray(x, dtype=float) - t[0]) / t[1]
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp(z))

    def ppf(self, u, t):
        return t[0] + t[1] * np.log(-np.log1p(-np.asarray(u, dtype=float)))

    def mean(self, t):
        return t[0] - EULER_GAMMA * t[1]

    def fit(self, x, start=None):
        _require_spread(x)
        xm = float(np.mean(x))
        xmax = x[-1]
        sd = float(np.std(x))

        def h(sig):
            w = np.exp((x - xmax) / sig)
            return float(np.sum(x * w) / np.sum(w)) - xm - sig

        lo, hi = sd * 1e-3, sd
        while h(hi) > 0:
            hi *= 2.0
        while h(lo) < 0:
            lo /= 2.0
        sigma = optimize.brentq(h, lo, hi, xtol=1e-14 * sd, rtol=1e-15, maxiter=500)
        mu = xmax + sigma * math.log(float(np.mean(np.exp((x - xmax) / sigma))))
        return mu, sigma


class _Gamma(_Dist):
    names, kinds = ("a", "b"), (SHAPE, SCALE)
    positive_support = True

    def _check(self, t):
        _positive("a", t[0])
        _positive("b", t[1])

    def logpdf(self, x, t):
        a, b = t
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = special.xlogy(a - 1, x) - x / b - special.gammaln(a) - a * math.log(b)
        return np.where(x > 0, out, np.where((x == 0) & (a == 1), -math.log(b), -np.inf))

    def cdf(self, x, t):
        x = np.asarray(x, dtype=float)
        return special.gammainc(t[0], np.maximum(x, 0.0) / t[1])

    def ppf(self, u, t):
        return special.gammaincinv(t[0], u) * t[1]

    def mean(self, t):
        return t[0] * t[1]

    def fit(self, x, start=None):
        _require_spread(x)
        m = float(np.mean(x))
        a = _solve_gamma_shape(math.log(m) - float(np.mean(np.log(x))))
        return a, m / a


class _GeneralizedExtremeValue(_Dist):
    """F(x) = exp(-(1 + k (x - mu)/sigma)^(-1/k)); k > 0 has a heavy upper tail."""

    names, kinds = ("k", "sigma", "mu"), (SHAPE, SCALE, LOCATION)
    min_n = 3

    def _check(self, t):
        _positive("sigma", t[1])

    def logpdf(self, x, t):
        k, sigma, mu = t
        z = (np.asarray(x, dtype=float) - mu) / sigma
        with np.errstate(all="ignore"):
            if abs(k) < 1e-10:
                return -math.log(sigma) - z - np.exp(-z)
            y = 1.0 + k * z
            ly = np.log(y)
            out = -math.log(sigma) - (1.0 + 1.0 / k) * ly - np.exp(-ly / k)
        return np.where(y > 0, out, -np.inf)

    def cdf(self, x, t):
        k, sigma, mu = t
        z = (np.asarray(x, dtype=float) - mu) / sigma
        with np.errstate(all="ignore"):
            if abs(k) < 1e-10:
                return np.exp(-np.exp(-z))
            y = 1.0 + k * z
            inside = np.exp(-np.exp(-np.log(np.where(y > 0, y, 1.0)) / k))
        return np.where(y > 0, inside, 0.0 if k > 0 else 1.0)

    def ppf(self, u, t):
        k, sigma, mu = t
        ml = -np.log(np.asarray(u, dtype=float))
        if abs(k) < 1e-10:
            return mu - sigma * np.log(ml)
        return mu + sigma * np.expm1(-k * np.log(ml)) / k

    def mean(self, t):
        k, sigma, mu = t
        if k >= 1:
            return math.inf
        if abs(k) < 1e-10:
            return mu + EULER_GAMMA * sigma
        return mu + sigma * (math.gamma(1 - k) - 1) / k

    def _objective(self, x):
        n = x.size

        def f(p):
            k, ls, mu = p
            s = math.exp(ls)
            z = (x - mu) / s
            with np.errstate(all="ignore"):
                y = 1.0 + k * z
                if not np.all(y > 0):
                    return np.inf, np.zeros(3)
                ly = np.log(y)
                if abs(k) < 1e-7:
                    # Gumbel limit
                    t = np.exp(-z)
                    val = ls + np.sum(z + t) / n
                    g_mu = -np.sum(1.0 - t) / (s * n)
                    g_ls = 1.0 - np.sum(z * (1.0 - t)) / n
                    g_k = -np.sum(0.5 * z * z * (1.0 - t) - z) / n
                    return val, np.array([g_k, g_ls, g_mu])
                t = np.exp(-ly / k)
                val = ls + np.sum((1.0 + 1.0 / k) * ly + t) / n
                r = (1.0 + k - t) / y
                g_mu = -np.sum(r) / (s * n)
                g_ls = 1.0 - np.sum(r * z) / n
                g_k = -np.sum((1.0 - t) * ly / (k * k) - z * r / k) / n
            return val, np.array([g_k, g_ls, g_mu])

        return f

    def fit(self, x, start=None):
        _require_spread(x)
        f = self._objective(x)
        if start is not None:
            starts = [(start[0], start[1], start[2])]
        else:
            sd = float(np.std(x))
            sig = sd * math.sqrt(6) / math.pi
            mu = float(np.mean(x)) - EULER_GAMMA * sig
            starts = [(k0, sig, mu) for k0 in (-0.2, 0.01, 0.2)]
        best = None
        for k0, s0, m0 in starts:
            p0 = np.array([k0, math.log(s0), m0])
            if not np.isfinite(f(p0)[0]):
                # pull the start inside the support
                p0[0] = 0.0
            try:
                p, val = _minimize(f, p0)
            except FitFailed:
                continue
            if best is None or val < best[1]:
                best = (p, val)
        if best is None:
            raise FitFailed("GEV fit found no parameters covering the data")
        k, ls, mu = best[0]
        return float(k), math.exp(ls), float(mu)


class _HalfNormal(_Dist):
    """Half-normal with location fixed at 0."""

    names, kinds = ("sigma",), (SCALE,)
    min_n = 1

    def _check(self, t):
        _positive("sigma", t[0])

    def check_support(self, x):
        if x[0] < 0:
            raise SupportViolation("HalfNormal requires nonnegative data")

    def logpdf(self, x, t):
        x = np.asarray(x, dtype=float)
        s = t[0]
        out = 0.5 * math.log(2 / math.pi) - math.log(s) - 0.5 * (x / s) ** 2
        return np.where(x >= 0, out, -np.inf)

    def cdf(self, x, t):
        x = np.asarray(x, dtype=float)
        return special.erf(np.maximum(x, 0.0) / (t[0] * math.sqrt(2)))

    def ppf(self, u, t):
        return t[0] * math.sqrt(2) * special.erfinv(np.asarray(u, dtype=float))

    def mean(self, t):
        return t[0] * math.sqrt(2 / math.pi)

    def fit(self, x, start=None):
        s = math.sqrt(float(np.mean(x * x)))
        if s == 0:
            raise DegenerateSample("all sample points are zero")
        return (s,)


class _InverseGaussian(_Dist):
    names, kinds = ("mu", "lambda"), (LOCATION, SHAPE)
    positive_support = True

    def _check(self, t):
        _positive("mu", t[0])
        _positive("lambda", t[1])

    def logpdf(self, x, t):
        mu, lam = t
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * np.log(lam / (2 * np.pi * x ** 3)) - lam * (x - mu) ** 2 / (2 * mu * mu * x)
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        mu, lam = t
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        r = np.sqrt(lam / xs)
        a = special.ndtr(r * (xs / mu - 1.0))
        b = np.exp(2.0 * lam / mu + special.log_ndtr(-r * (xs / mu + 1.0)))
        return np.where(x > 0, np.clip(a + b, 0.0, 1.0), 0.0)

    def ppf(self, u, t):
        mu, lam = t
        u = np.asarray(u, dtype=float)
        # Wilson-Hilferty style start from a lognormal match, then safeguarded Newton.
        s2 = math.log1p(mu / lam)
        x = mu * np.exp(-0.5 * s2 + math.sqrt(s2) * special.ndtri(u))
        lo = np.zeros_like(x)
        hi = np.full_like(x, np.inf)
        for _ in range(200):
            f = self.cdf(x, t) - u
            lo = np.where(f < 0, x, lo)
            hi = np.where(f > 0, x, hi)
            d = np.exp(self.logpdf(x, t))
            with np.errstate(all="ignore"):
                xn = x - f / d
            bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
            bis = np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * x)
            xn = np.where(bad, bis, xn)
            if np.all(np.abs(xn - x) <= 1e-15 * np.abs(x)):
                x = xn
                break
            x = xn
        return x

    def mean(self, t):
        return t[0]

    def fit(self, x, start=None):
        _require_spread(x)
        mu = float(np.mean(x))
        inv = float(np.mean(1.0 / x)) - 1.0 / mu
        if not inv > 0:
            raise DegenerateSample("inverse Gaussian shape estimate is unbounded")
        return mu, 1.0 / inv


def _logistic_fit(y, start=None):
    """MLE of logistic (mu, sigma) on data y."""
    n = y.size

    def f(p):
        mu, ls = p
        s = math.exp(ls)
        z = (y - mu) / s
        th = np.tanh(0.5 * z)
        # -logpdf = z + ln s + 2 log1p(exp(-z)) = ln s + 2 logaddexp(0, -z) + z
        val = np.sum(z + 2.0 * np.logaddexp(0.0, -z)) / n + ls
        g_mu = -np.sum(th) / (s * n)
        g_ls = 1.0 - np.sum(z * th) / n
        return val, np.array([g_mu, g_ls])

    if start is None:
        start = (float(np.mean(y)), float(np.std(y)) * math.sqrt(3) / math.pi)
    p, _ = _minimize(f, np.array([start[0], math.log(start[1])]))
    return float(p[0]), math.exp(p[1])


class _Logistic(_Dist):
    names, kinds = ("mu", "sigma"), (LOCATION, SCALE)

    def _check(self, t):
        _positive("sigma", t[1])

    def logpdf(self, x, t):
        z = (np.asarray(x, dtype=float) - t[0]) / t[1]
        return -z - 2.0 * np.logaddexp(0.0, -z) - math.log(t[1])

    def cdf(self, x, t):
        return special.expit((np.asarray(x, dtype=float) - t[0]) / t[1])

    def ppf(self, u, t):
        u = np.asarray(u, dtype=float)
        return t[0] - t[1] * np.log((1.0 - u) / u)

    def mean(self, t):
        return t[0]

    def fit(self, x, start=None):
        _require_spread(x)
        return _logistic_fit(x, start)


class _Loglogistic(_Dist):
    """log(X) is Logistic(mu, sigma)."""

    names, kinds = ("mu", "sigma"), (LOCATION, SCALE)
    positive_support = True

    def _check(self, t):
        _positive("sigma", t[1])

    def logpdf(self, x, t):
        x = np.asarray(x, dtype=float)
        lx = _log(np.where(x > 0, x, 1.0))
        out = _Logistic.logpdf(self, lx, t) - lx
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        x = np.asarray(x, dtype=float)
        lx = _log(np.where(x > 0, x, 1.0))
        return np.where(x > 0, special.expit((lx - t[0]) / t[1]), 0.0)

    def ppf(self, u, t):
        return np.exp(_Logistic.ppf(self, u, t))

    def mean(self, t):
        mu, s = t
        if s >= 1:
            return math.inf
        return math.exp(mu) * math.pi * s / math.sin(math.pi * s)

    def fit(self, x, start=None):
        _require_spread(x)
        return _logistic_fit(np.log(x), start)


class _Lognormal(_Dist):
    names, kinds = ("mu", "sigma"), (LOCATION, SCALE)
    positive_support = True

    def _check(self, t):
        _positive("sigma", t[1])

    def logpdf(self, x, t):
        x = np.asarray(x, dtype=float)
        lx = _log(np.where(x > 0, x, 1.0))
        z = (lx - t[0]) / t[1]
        out = -0.5 * z * z - lx - math.log(t[1]) - 0.5 * math.log(2 * math.pi)
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        x = np.asarray(x, dtype=float)
        lx = _log(np.where(x > 0, x, 1.0))
        return np.where(x > 0, special.ndtr((lx - t[0]) / t[1]), 0.0)

    def ppf(self, u, t):
        return np.exp(t[0] + t[1] * special.ndtri(u))

    def mean(self, t):
        return math.exp(t[0] + t[1] ** 2 / 2)

    def fit(self, x, start=None):
        _require_spread(x)
        lx = np.log(x)
        return float(np.mean(lx)), float(np.std(lx))


class _Nakagami(_Dist):
    names, kinds = ("mu", "omega"), (SHAPE, SCALE)
    positive_support = True

    def _check(self, t):
        if not t[0] >= 0.5:
            raise InvalidParams(f"Nakagami shape mu must be >= 0.5, got {t[0]}")
        _positive("omega", t[1])

    def logpdf(self, x, t):
        m, om = t
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (math.log(2) + m * math.log(m / om) - special.gammaln(m)
                   + special.xlogy(2 * m - 1, x) - m * x * x / om)
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        m, om = t
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammainc(m, m * x * x / om)

    def ppf(self, u, t):
        m, om = t
        return np.sqrt(special.gammaincinv(m, u) * om / m)

    def mean(self, t):
        m, om = t
        return math.sqrt(om / m) * math.exp(special.gammaln(m + 0.5) - special.gammaln(m))

    def fit(self, x, start=None):
        _require_spread(x)
        y = x * x
        om = float(np.mean(y))
        m = _solve_gamma_shape(math.log(om) - float(np.mean(np.log(y))))
        return max(m, 0.5), om


class _Normal(_Dist):
    names, kinds = ("mu", "sigma"), (LOCATION, SCALE)

    def _check(self, t):
        _positive("sigma", t[1])

    def logpdf(self, x, t):
        z = (np.asarray(x, dtype=float) - t[0]) / t[1]
        return -0.5 * z * z - math.log(t[1]) - 0.5 * math.log(2 * math.pi)

    def cdf(self, x, t):
        return special.ndtr((np.asarray(x, dtype=float) - t[0]) / t[1])

    def ppf(self, u, t):
        return t[0] + t[1] * special.ndtri(u)

    def mean(self, t):
        return t[0]

    def fit(self, x, start=None):
        _require_spread(x)
        return float(np.mean(x)), float(np.std(x))


class _Poisson(_Dist):
    names, kinds = ("lambda",), (LOCATION,)
    min_n = 1
    discrete = True

    def _check(self, t):
        _positive("lambda", t[0])

    def check_support(self, x):
        if x[0] < 0:
            raise SupportViolation("Poisson requires nonnegative data")

    def logpdf(self, x, t):
        lam = t[0]
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x == np.floor(x))
        xs = np.where(ok, x, 0.0)
        out = special.xlogy(xs, lam) - lam - special.gammaln(xs + 1)
        return np.where(ok, out, -np.inf)

    def cdf(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, special.pdtr(np.floor(np.maximum(x, 0.0)), t[0]), 0.0)

    def ppf(self, u, t):
        lam = t[0]
        u = np.asarray(u, dtype=float)
        k = np.maximum(np.ceil(special.pdtrik(u, lam)), 0.0)
        # pdtrik is a continuous inverse; settle on the smallest k with cdf(k) >= u
        for _ in range(3):
            k = np.where(special.pdtr(k, lam) < u, k + 1, k)
            k = np.where((k > 0) & (special.pdtr(k - 1, lam) >= u), k - 1, k)
        return k

    def mean(self, t):
        return t[0]

    def fit(self, x, start=None):
        lam = float(np.mean(x))
        if not lam > 0:
            raise DegenerateSample("Poisson rate estimate is 0")
        return (lam,)


class _Rayleigh(_Dist):
    names, kinds = ("b",), (SCALE,)
    min_n = 1
    positive_support = True

    def _check(self, t):
        _positive("b", t[0])

    def logpdf(self, x, t):
        b = t[0]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _log(x) - 2 * math.log(b) - 0.5 * (x / b) ** 2
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-0.5 * (x / t[0]) ** 2)

    def ppf(self, u, t):
        return t[0] * np.sqrt(-2.0 * np.log1p(-np.asarray(u, dtype=float)))

    def mean(self, t):
        return t[0] * math.sqrt(math.pi / 2)

    def fit(self, x, start=None):
        return (math.sqrt(float(np.mean(x * x)) / 2.0),)


class _TLocationScale(_Dist):
    names, kinds = ("mu", "sigma", "nu"), (LOCATION, SCALE, SHAPE)
    min_n = 3
    NU_BOUNDS = (math.log(0.05), math.log(1e6))

    def _check(self, t):
        _positive("sigma", t[1])
        _positive("nu", t[2])

    def logpdf(self, x, t):
        mu, s, nu = t
        z = (np.asarray(x, dtype=float) - mu) / s
        c = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
             - 0.5 * math.log(nu * math.pi) - math.log(s))
        return c - 0.5 * (nu + 1) * np.log1p(z * z / nu)

    def cdf(self, x, t):
        mu, s, nu = t
        return special.stdtr(nu, (np.asarray(x, dtype=float) - mu) / s)

    def ppf(self, u, t):
        mu, s, nu = t
        return mu + s * special.stdtrit(nu, u)

    def mean(self, t):
        return t[0] if t[2] > 1 else math.nan

    def _objective(self, x):
        n = x.size

        def f(p):
            mu, ls, lnu = p
            s, nu = math.exp(ls), math.exp(lnu)
            z = (x - mu) / s
            q = z * z / nu
            l1 = np.log1p(q)
            w = (nu + 1) / (nu + z * z)
            c = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
                 - 0.5 * math.log(nu * math.pi) - ls)
            val = -(c - 0.5 * (nu + 1) * np.sum(l1) / n)
            g_mu = -np.sum(w * z) / (s * n)
            g_ls = 1.0 - np.sum(w * z * z) / n
            dnu = (0.5 * special.digamma((nu + 1) / 2) - 0.5 * special.digamma(nu / 2)
                   - 0.5 / nu - 0.5 * np.sum(l1) / n + 0.5 * np.sum(w * q) / n)
            return val, np.array([g_mu, g_ls, -dnu * nu])

        return f

    def fit(self, x, start=None):
        _require_spread(x)
        f = self._objective(x)
        bounds = [(None, None), (None, None), self.NU_BOUNDS]
        if start is not None:
            starts = [(start[0], start[1], start[2])]
        else:
            med = float(np.median(x))
            mad = float(np.median(np.abs(x - med))) * 1.4826
            if mad <= 0:
                mad = float(np.std(x))
            starts = [(med, mad, nu0) for nu0 in (2.0, 5.0, 30.0)]
        best = None
        for mu0, s0, nu0 in starts:
            try:
                p, val = _minimize(f, np.array([mu0, math.log(s0), math.log(nu0)]), bounds=bounds)
            except FitFailed:
                continue
            if best is None or val < best[1]:
                best = (p, val)
        if best is None:
            raise FitFailed("t location-scale fit failed from every start")
        mu, ls, lnu = best[0]
        return float(mu), math.exp(ls), math.exp(lnu)


class _Weibull(_Dist):
    """F(x) = 1 - exp(-(x/a)^b); a is scale, b is shape."""

    names, kinds = ("a", "b"), (SCALE, SHAPE)
    positive_support = True

    def _check(self, t):
        _positive("a", t[0])
        _positive("b", t[1])

    def logpdf(self, x, t):
        a, b = t
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = x / a
            out = math.log(b / a) + special.xlogy(b - 1, z) - z ** b
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x, t):
        a, b = t
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-((x / a) ** b))

    def ppf(self, u, t):
        a, b = t
        return a * (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / b)

    def mean(self, t):
        return t[0] * math.gamma(1 + 1 / t[1])

    def fit(self, x, start=None):
        _require_spread(x)
        lx = np.log(x)
        lmax = float(lx[-1])
        d = lx - lmax
        mlx = float(np.mean(d))

        def g(b):
            w = np.exp(b * d)
            sw = np.sum(w)
            m1 = float(np.sum(w * d) / sw)
            m2 = float(np.sum(w * d * d) / sw)
            return m1 - 1.0 / b - mlx, (m2 - m1 * m1) + 1.0 / (b * b)

        b = math.pi / (math.sqrt(6) * float(np.std(lx))) if start is None else start[1]
        lo, hi = 0.0, math.inf
        for _ in range(200):
            val, der = g(b)
            if val < 0:
                lo = b
            else:
                hi = b
            bn = b - val / der
            if not (lo < bn < hi):
                bn = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * b
            if abs(bn - b) <= 1e-14 * b:
                b = bn
                break
            b = bn
        a = math.exp(lmax + math.log(float(np.mean(np.exp(b * d)))) / b)
        return a, b


_IMPL: dict[Family, _Dist] = {
    Family.BirnbaumSaunders: _BirnbaumSaunders(),
    Family.ExtremeValue: _ExtremeValue(),
    Family.Gamma: _Gamma(),
    Family.GeneralizedExtremeValue: _GeneralizedExtremeValue(),
    Family.HalfNormal: _HalfNormal(),
    Family.InverseGaussian: _InverseGaussian(),
    Family.Logistic: _Logistic(),
    Family.Loglogistic: _Loglogistic(),
    Family.Lognormal: _Lognormal(),
    Family.Nakagami: _Nakagami(),
    Family.Normal: _Normal(),
    Family.Poisson: _Poisson(),
    Family.Rayleigh: _Rayleigh(),
    Family.TLocationScale: _TLocationScale(),
    Family.Weibull: _Weibull(),
}


def param_names(family) -> tuple[str, ...]:
    return _IMPL[Family.parse(family)].names


def param_kinds(family) -> tuple[str, ...]:
    """Per-parameter role: ``"location"``, ``"scale"`` or ``"shape"``."""
    return _IMPL[Family.parse(family)].kinds


def is_discrete(family) -> bool:
    return _IMPL[Family.parse(family)].discrete


def theta_of(family, params: ParamsLike) -> tuple[float, ...]:
    """Validate ``params`` and return them as a tuple in canonical order."""
    fam = Family.parse(family)
    impl = _IMPL[fam]
    if isinstance(params, Mapping):
        unknown = set(params) - set(impl.names)
        missing = [n for n in impl.names if n not in params]
        if unknown or missing:
            raise InvalidParams(
                f"{fam} expects parameters {', '.join(impl.names)}"
                + (f"; missing {missing}" if missing else "")
                + (f"; unknown {sorted(unknown)}" if unknown else "")
            )
        theta = tuple(float(params[n]) for n in impl.names)
    else:
        theta = tuple(float(v) for v in params)
        if len(theta) != len(impl.names):
            raise InvalidParams(f"{fam} expects {len(impl.names)} parameters, got {len(theta)}")
    impl.check(theta)
    return theta


def make_params(family, params: ParamsLike) -> dict[str, float]:
    fam = Family.parse(family)
    return dict(zip(_IMPL[fam].names, theta_of(fam, params)))


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


def cdf(family, params: ParamsLike, x):
    fam = Family.parse(family)
    theta = theta_of(fam, params)
    out = np.clip(_IMPL[fam].cdf(np.asarray(x, dtype=float), theta), 0.0, 1.0)
    return _scalar_or_array(out, x)


def pdf(family, params: ParamsLike, x):
    """Density (probability mass for Poisson) at ``x``."""
    fam = Family.parse(family)
    theta = theta_of(fam, params)
    with np.errstate(under="ignore"):
        out = np.exp(_IMPL[fam].logpdf(np.asarray(x, dtype=float), theta))
    return _scalar_or_array(out, x)


def logpdf(family, params: ParamsLike, x):
    fam = Family.parse(family)
    theta = theta_of(fam, params)
    return _scalar_or_array(_IMPL[fam].logpdf(np.asarray(x, dtype=float), theta), x)


def quantile(family, params: ParamsLike, u):
    fam = Family.parse(family)
    theta = theta_of(fam, params)
    ua = np.asarray(u, dtype=float)
    if np.any(~(ua > 0) | ~(ua < 1)):
        raise ProbabilityOutOfRange("quantile requires 0 < u < 1")
    return _scalar_or_array(_IMPL[fam].ppf(ua, theta), u)


def mean(family, params: ParamsLike) -> float:
    """Analytic mean; ``inf`` or ``nan`` when it does not exist."""
    fam = Family.parse(family)
    return float(_IMPL[fam].mean(theta_of(fam, params)))


def log_likelihood(family, params: ParamsLike, sample) -> float:
    fam = Family.parse(family)
    theta = theta_of(fam, params)
    x = sample.values if isinstance(sample, SampleSet) else np.asarray(sample, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = float(np.sum(_IMPL[fam].logpdf(x, theta)))
    return ll if not math.isnan(ll) else -math.inf


@dataclass(frozen=True)
class FittedModel:
    family: Family
    params: dict[str, float]
    log_likelihood: float
    sample_size: int
    theta: tuple[float, ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if not self.theta:
            object.__setattr__(self, "theta", theta_of(self.family, self.params))

    def cdf(self, x):
        return np.clip(_IMPL[self.family].cdf(np.asarray(x, dtype=float), self.theta), 0.0, 1.0)

    def pdf(self, x):
        return pdf(self.family, self.theta, x)

    def quantile(self, u):
        return quantile(self.family, self.theta, u)

    def as_record(self) -> dict:
        """Flat report record; parameter values rounded to 6 significant digits."""
        rec: dict = {"family": self.family.value}
        for name, v in self.params.items():
            rec[name] = float(f"{v:.6g}")
        rec["log_likelihood"] = self.log_likelihood
        rec["sample_size"] = self.sample_size
        return rec


def _fit_theta(fam: Family, x: np.ndarray, start=None) -> tuple[float, ...]:
    impl = _IMPL[fam]
    if x.size < impl.min_n:
        raise DegenerateSample(f"{fam} needs at least {impl.min_n} points, got {x.size}")
    impl.check_support(x)
    with np.errstate(all="ignore"):
        try:
            theta = tuple(float(v) for v in impl.fit(x, start))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            raise FitFailed(f"{fam} fit failed: {exc}") from exc
    try:
        impl.check(theta)
    except InvalidParams as exc:
        raise FitFailed(f"{fam} fit left the parameter domain: {exc}") from exc
    return theta


def mle_fit(family, sample, start: ParamsLike | None = None) -> FittedModel:
    """Maximum-likelihood fit of ``family`` to ``sample``.

    ``start`` optionally warm-starts iterative fits (families with a closed
    form or a one-dimensional profile equation ignore it).
    """
    fam = Family.parse(family)
    s = as_sample(sample)
    theta0 = theta_of(fam, start) if start is not None else None
    theta = _fit_theta(fam, s.values, theta0)
    ll = log_likelihood(fam, theta, s)
    return FittedModel(fam, dict(zip(_IMPL[fam].names, theta)), ll, len(s), theta)


def fit_sorted(fam: Family, x: np.ndarray, start=None) -> tuple[tuple[float, ...], float]:
    """Fast path for the bootstrap: fit an already-sorted float array.

    Returns ``(theta, log_likelihood)`` without building a :class:`SampleSet`.
    """
    theta = _fit_theta(fam, x, start)
    with np.errstate(all="ignore"):
        ll = float(np.sum(_IMPL[fam].logpdf(x, theta)))
    return theta, ll


def cdf_theta(fam: Family, theta, x):
    """Unvalidated vectorized CDF for hot loops; ``theta`` must come from :func:`theta_of`."""
    return _IMPL[fam].cdf(x, theta)


def ppf_theta(fam: Family, theta, u):
    return _IMPL[fam].ppf(u, theta)
