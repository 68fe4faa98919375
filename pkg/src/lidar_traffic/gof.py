"""Goodness-of-fit testing and model selection.

The one-sample test fits each candidate family by maximum likelihood and
calibrates the KS statistic with a parametric bootstrap: resamples are drawn
from the fitted model, each resample is refitted, and the p-value is the
fraction of resample statistics strictly larger than the observed one.
Because the parameters are estimated from the data, the classical Kolmogorov
p-value would be far too lenient here.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import distributions as dist
from .distributions import Ecdf, Family, FittedModel, SampleSet, as_sample, ecdf
from .errors import (
    AllFitsFailed,
    BootstrapDegenerate,
    EmptySample,
    InvalidParams,
    TrafficModelError,
    ZeroDenominator,
)
from .sampling import RngStream, _draw_theta

log = logging.getLogger(__name__)

ASYMPTOTIC, BOOTSTRAP, TWO_SAMPLE = "asymptotic", "bootstrap", "two_sample"


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: float
    method: str


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 1000
    alpha: float = 0.01
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.resamples < 100:
            raise InvalidParams("at least 100 bootstrap resamples are required")
        if not 0 < self.alpha < 1:
            raise InvalidParams("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class GofOutcome:
    family: Family
    fitted: FittedModel | None
    ks: KsResult
    passed: bool
    error: str | None = None


@dataclass(frozen=True)
class SelectionResult:
    outcomes: list[GofOutcome]
    passing_set: list[Family]
    chosen: Family
    used_nrmse_fallback: bool
    nrmse_values: dict[Family, float] = field(default_factory=dict)

    def outcome(self, family) -> GofOutcome:
        fam = Family.parse(family)
        return next(o for o in self.outcomes if o.family is fam)

    @property
    def chosen_model(self) -> FittedModel:
        return self.outcome(self.chosen).fitted


# ---------------------------------------------------------------------------
# KS statistics
# ---------------------------------------------------------------------------


def _ks_sorted(x: np.ndarray, F: np.ndarray) -> float:
    n = x.size
    j = np.arange(1, n + 1)
    hi = np.abs(j / n - F)
    lo = np.abs((j - 1) / n - F)
    return float(max(hi.max(), lo.max()))


def ks_statistic(e: Ecdf, hypothesized_cdf: Callable) -> float:
    """Sup-distance between an ECDF and a CDF, left limits included.

    Evaluated at the sample points only: both the step height and the height
    just before each step are compared against ``hypothesized_cdf``.
    """
    x = e.points
    F = np.asarray(hypothesized_cdf(x), dtype=float)
    left = getattr(hypothesized_cdf, "left_limit", None)
    if left is None:
        return _ks_sorted(x, F)
    # step-function hypothesis (e.g. another ECDF): match left limits with left limits
    upto = e(x)
    below = e.left_limit(x)
    Fl = np.asarray(left(x), dtype=float)
    return float(max(np.abs(upto - F).max(), np.abs(below - Fl).max()))


def kolmogorov_sf(lam: float) -> float:
    """Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2), clamped to [0, 1]."""
    if lam < 0.05:
        return 1.0  # 1 - Q(0.05) is below 1e-200
    if lam < 0.6:
        # the alternating series converges slowly here; use the Jacobi theta
        # transform of the same function
        s = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam))
            s += term
            if term < 1e-16:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        s += term if k % 2 else -term
        if term < 1e-12 * max(s, 1e-300) or term == 0.0:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_pvalue_asymptotic(d: float, n: float) -> float:
    if not 0 <= d <= 1 or n <= 0:
        raise InvalidParams("need 0 <= d <= 1 and n >= 1")
    return kolmogorov_sf(math.sqrt(n) * d)


def ks_one_sample(sample, family, params) -> KsResult:
    """KS test against fully specified parameters, asymptotic p-value."""
    fam = Family.parse(family)
    theta = dist.theta_of(fam, params)
    e = ecdf(as_sample(sample))
    d = ks_statistic(e, lambda x: dist.cdf_theta(fam, theta, x))
    return KsResult(d, ks_pvalue_asymptotic(d, e.n), e.n, ASYMPTOTIC)


def ks_two_sample(a, b) -> KsResult:
    a = np.sort(np.asarray(a.values if isinstance(a, SampleSet) else a, dtype=float).ravel())
    b = np.sort(np.asarray(b.values if isinstance(b, SampleSet) else b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample("two-sample KS needs two nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return KsResult(d, ks_pvalue_asymptotic(d, n_eff), n_eff, TWO_SAMPLE)


# ---------------------------------------------------------------------------
# NRMSE
# ---------------------------------------------------------------------------


def _nrmse_values(emp: np.ndarray, F: np.ndarray) -> float:
    num = float(np.sum((emp - F) ** 2))
    den = float(np.sum((emp - F.mean()) ** 2))
    if den == 0.0:
        if num == 0.0:
            raise ZeroDenominator("NRMSE undefined: hypothesized CDF is constant and matches the ECDF")
        return math.inf
    return math.sqrt(num / den)


def nrmse(e: Ecdf, fitted) -> float:
    """Normalized RMS gap between ECDF heights and the fitted CDF at the sample points.

    ``fitted`` is a :class:`FittedModel` or any vectorized CDF callable.
    """
    cdf_fn = fitted.cdf if isinstance(fitted, FittedModel) else fitted
    F = np.asarray(cdf_fn(e.points), dtype=float)
    return _nrmse_values(e.heights(), F)


# ---------------------------------------------------------------------------
# Parametric bootstrap
# ---------------------------------------------------------------------------

_FAMILY_INDEX = {f: i for i, f in enumerate(dist.FAMILIES)}


def _stream_id(fam: Family, attempt: int) -> int:
    return (_FAMILY_INDEX[fam] << 40) | attempt


def _resample_stat(fam: Family, theta, n: int, seed: int, attempt: int) -> float:
    rng = RngStream(seed, _stream_id(fam, attempt))
    x = np.sort(_draw_theta(fam, theta, rng, n))
    theta_l, _ = dist.fit_sorted(fam, x, start=theta)
    return _ks_sorted(x, dist.cdf_theta(fam, theta_l, x))


def _resample_or_none(args):
    try:
        return _resample_stat(*args)
    except TrafficModelError:
        return None


def bootstrap_statistics(fam: Family, theta, n: int, resamples: int, seed: int, workers: int = 1) -> np.ndarray:
    """KS statistics of ``resamples`` refitted parametric resamples.

    Resample ``l`` uses stream ``(seed, family, attempt)``; a resample whose
    refit fails is replaced by the next unused attempt, up to ``10 * resamples``
    attempts in total.
    """
    stats: list[float] = []
    next_attempt = 0
    budget = 10 * resamples
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while len(stats) < resamples:
            want = resamples - len(stats)
            if next_attempt + want > budget:
                raise BootstrapDegenerate(
                    f"{fam}: fewer than {resamples} successful refits in {budget} attempts"
                )
            jobs = [(fam, theta, n, seed, a) for a in range(next_attempt, next_attempt + want)]
            next_attempt += want
            results = pool.map(_resample_or_none, jobs, chunksize=16) if pool else map(_resample_or_none, jobs)
            stats.extend(r for r in results if r is not None)
    finally:
        if pool:
            pool.shutdown()
    return np.asarray(stats)


def bootstrap_pvalue(family, sample, cfg: BootstrapConfig = BootstrapConfig()) -> GofOutcome:
    fam = Family.parse(family)
    s = as_sample(sample)
    fitted = dist.mle_fit(fam, s)
    e = ecdf(s)
    d = _ks_sorted(e.points, fitted.cdf(e.points))
    d_l = bootstrap_statistics(fam, fitted.theta, len(s), cfg.resamples, cfg.seed, cfg.workers)
    p = float(np.count_nonzero(d_l > d)) / cfg.resamples
    ks = KsResult(d, p, len(s), BOOTSTRAP)
    return GofOutcome(fam, fitted, ks, p >= cfg.alpha)


def select_model(sample, families=None, cfg: BootstrapConfig = BootstrapConfig()) -> SelectionResult:
    """Run the bootstrap test for each family and pick the best fit.

    Among families that pass, the largest p-value wins; ties go to the smaller
    NRMSE, then to the alphabetically first family name.  When nothing
    passes, the family with the smallest NRMSE is chosen instead.  A family
    whose fit fails is recorded with p-value 0 and never chosen.
    """
    s = as_sample(sample)
    fams = [Family.parse(f) for f in (families or dist.FAMILIES)]
    if not fams:
        raise InvalidParams("no candidate families given")
    e = ecdf(s)
    outcomes: list[GofOutcome] = []
    nrmses: dict[Family, float] = {}
    for fam in fams:
        try:
            out = bootstrap_pvalue(fam, s, cfg)
            nrmses[fam] = nrmse(e, out.fitted)
        except TrafficModelError as exc:
            log.info("%s: %s", fam, exc)
            out = GofOutcome(fam, None, KsResult(1.0, 0.0, len(s), BOOTSTRAP), False, str(exc))
            nrmses[fam] = math.inf
        outcomes.append(out)
    ok = [o for o in outcomes if o.fitted is not None]
    if not ok:
        raise AllFitsFailed("every candidate family failed to fit")
    passing = [o.family for o in outcomes if o.passed]
    if passing:
        best = min(
            (o for o in outcomes if o.passed),
            key=lambda o: (-o.ks.p_value, nrmses[o.family], o.family.value),
        )
        return SelectionResult(outcomes, passing, best.family, False, nrmses)
    best = min(ok, key=lambda o: (nrmses[o.family], o.family.value))
    return SelectionResult(outcomes, passing, best.family, True, nrmses)


def gof_report_rows(result: SelectionResult) -> list[list[str]]:
    rows = []
    for o in result.outcomes:
        ll = o.fitted.log_likelihood if o.fitted is not None else math.nan
        rows.append([
            o.family.value, f"{o.ks.statistic:.6g}", f"{o.ks.p_value:.6g}",
            "true" if o.passed else "false", f"{result.nrmse_values[o.family]:.6g}", f"{ll:.10g}",
        ])
    return rows


GOF_HEADER = ["family", "ks_statistic", "p_value", "passed", "nrmse", "loglik"]


def format_gof_report(result: SelectionResult) -> str:
    lines = [",".join(GOF_HEADER)]
    lines += [",".join(r) for r in gof_report_rows(result)]
    lines.append(f"# chosen={result.chosen.value} fallback={'true' if result.used_nrmse_fallback else 'false'}")
    return "\n".join(lines) + "\n"
