import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from lidar_traffic import distributions as dist
from lidar_traffic import gof
from lidar_traffic.distributions import Family
from lidar_traffic.errors import AllFitsFailed, EmptySample, InvalidParams, ZeroDenominator
from lidar_traffic.gof import BootstrapConfig
from lidar_traffic.sampling import RngStream, draw, draw_positive


def brute_force_ks(values, F):
    """Check both sides of every step of the ECDF by direct counting."""
    n = len(values)
    best = 0.0
    for x in values:
        below = sum(v < x for v in values) / n
        upto = sum(v <= x for v in values) / n
        f = F(x)
        best = max(best, abs(upto - f), abs(below - f))
    return best


def test_ks_matches_brute_force_oracle():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        # integer-valued data forces ties
        values = rng.integers(0, 20, n).astype(float) if rng.random() < 0.5 else rng.normal(10, 4, n)
        mu, sigma = rng.normal(10, 2), rng.uniform(1, 6)
        F = lambda x: stats.norm.cdf(x, mu, sigma)  # noqa: E731
        got = gof.ks_statistic(dist.ecdf(values), F)
        assert got == brute_force_ks(list(values), F)


def test_ks_examples():
    uniform04 = lambda x: np.clip(np.asarray(x) / 4.0, 0, 1)  # noqa: E731
    assert gof.ks_statistic(dist.ecdf([1, 2, 3]), uniform04) == pytest.approx(0.25)
    e = dist.ecdf([1.0, 2.0, 2.0, 5.0])
    assert gof.ks_statistic(e, e) == 0.0
    assert gof.ks_statistic(dist.ecdf([3.0]), lambda x: stats.norm.cdf(x, 3.0, 1.0)) == 0.5


def test_asymptotic_pvalue_examples():
    assert gof.ks_pvalue_asymptotic(0.0, 100) == 1.0
    assert gof.ks_pvalue_asymptotic(0.136, 100) == pytest.approx(special.kolmogorov(1.36), abs=1e-12)
    assert gof.ks_pvalue_asymptotic(0.136, 100) == pytest.approx(0.05, abs=0.002)
    assert gof.ks_pvalue_asymptotic(0.5, 100) < 1e-20


def test_kolmogorov_series_matches_scipy():
    for lam in np.linspace(0.01, 6.0, 600):
        assert gof.kolmogorov_sf(lam) == pytest.approx(special.kolmogorov(lam), rel=1e-9, abs=1e-13)


@settings(max_examples=300, deadline=None)
@given(d1=st.floats(0, 1), d2=st.floats(0, 1), n=st.integers(1, 100_000))
def test_pvalue_nonincreasing_in_d(d1, d2, n):
    lo, hi = sorted((d1, d2))
    p_lo, p_hi = gof.ks_pvalue_asymptotic(lo, n), gof.ks_pvalue_asymptotic(hi, n)
    assert 0.0 <= p_hi <= p_lo <= 1.0


def test_ks_one_sample_against_scipy():
    x = draw("Normal", (5, 2), RngStream(0, 0), size=500)
    r = gof.ks_one_sample(x, "Normal", (5, 2))
    ref = stats.kstest(x, "norm", args=(5, 2), method="asymp")
    assert r.statistic == pytest.approx(ref.statistic, abs=1e-15)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-6)
    assert r.method == gof.ASYMPTOTIC


# --- NRMSE ----------------------------------------------------------------------


def test_nrmse_examples():
    e = dist.ecdf([1.0, 2.0])
    assert gof.nrmse(e, lambda x: np.array([0.5, 1.0])) == 0.0
    assert gof.nrmse(e, lambda x: np.full(len(x), 0.3)) == pytest.approx(1.0)
    assert gof.nrmse(e, lambda x: np.array([0.4, 0.9])) == pytest.approx(math.sqrt(0.02 / 0.145), rel=1e-12)
    assert gof.nrmse(e, lambda x: np.array([0.4, 0.9])) == pytest.approx(0.3714, abs=5e-5)


def test_nrmse_zero_denominator():
    e = dist.ecdf([1.0, 1.0])
    with pytest.raises(ZeroDenominator):
        gof.nrmse(e, lambda x: np.ones(len(x)))


# --- bootstrap --------------------------------------------------------------------


def _fake_bootstrap(stats_fn):
    def fake(fam, theta, n, resamples, seed, workers=1):
        return stats_fn(resamples)
    return fake


def test_bootstrap_exceedance_arithmetic(monkeypatch):
    x = draw("Normal", (0, 1), RngStream(1, 0), size=200)
    d = gof.ks_statistic(dist.ecdf(x), dist.mle_fit("Normal", x).cdf)
    monkeypatch.setattr(gof, "bootstrap_statistics",
                        _fake_bootstrap(lambda L: np.r_[np.full(36, d + 0.01), np.full(L - 36, d)]))
    out = gof.bootstrap_pvalue("Normal", x, BootstrapConfig(resamples=1000))
    assert out.ks.p_value == pytest.approx(0.036)
    assert out.passed  # 0.036 >= 0.01
    monkeypatch.setattr(gof, "bootstrap_statistics", _fake_bootstrap(lambda L: np.full(L, 1.0)))
    assert gof.bootstrap_pvalue("Normal", x, BootstrapConfig(resamples=100)).ks.p_value == 1.0


def test_bootstrap_config_validation():
    with pytest.raises(InvalidParams):
        BootstrapConfig(resamples=99)
    with pytest.raises(InvalidParams):
        BootstrapConfig(alpha=1.0)


def test_bootstrap_deterministic_and_worker_invariant():
    x = draw("Gamma", (2.81, 6.06), RngStream(2, 0), size=300)
    cfg = BootstrapConfig(resamples=100, seed=9)
    a = gof.bootstrap_pvalue("Gamma", x, cfg)
    b = gof.bootstrap_pvalue("Gamma", x, cfg)
    c = gof.bootstrap_pvalue("Gamma", x, BootstrapConfig(resamples=100, seed=9, workers=2))
    assert a.ks == b.ks == c.ks


def test_bootstrap_statistics_against_direct_loop():
    theta = (2.81, 6.06)
    got = gof.bootstrap_statistics(Family.Gamma, theta, 150, 100, seed=4)
    for l in (0, 17, 99):
        rng = RngStream(4, gof._stream_id(Family.Gamma, l))
        y = rng.gamma(theta[0], theta[1], 150)
        fit = dist.mle_fit("Gamma", y)
        assert got[l] == pytest.approx(gof.ks_statistic(dist.ecdf(y), fit.cdf), abs=1e-9)


def test_power_normal_vs_rayleigh():
    rejects = 0
    for seed in range(20):
        x = draw_positive("Normal", (1458.7, 455.36), RngStream(seed, 0), size=2000)
        rejects += not gof.bootstrap_pvalue("Rayleigh", x, BootstrapConfig(resamples=100, seed=seed)).passed
    assert rejects == 20


# --- model selection ---------------------------------------------------------------


def test_select_gamma_over_all_families():
    x = draw("Gamma", (1.87, 131.97), RngStream(21, 0), size=43_552)
    res = gof.select_model(x, None, BootstrapConfig(resamples=100, seed=21))
    assert len(res.outcomes) == 15
    assert Family.Gamma in res.passing_set
    assert not res.used_nrmse_fallback
    assert res.nrmse_values[res.chosen] <= res.nrmse_values[Family.Gamma] or res.chosen is Family.Gamma
    best_p = max(o.ks.p_value for o in res.outcomes if o.passed)
    assert res.outcome(res.chosen).ks.p_value == best_p


def test_select_bimodal_falls_back_to_nrmse():
    a = draw("Normal", (100, 5), RngStream(1, 0), size=1000)
    b = draw("Normal", (500, 5), RngStream(1, 1), size=1000)
    res = gof.select_model(np.r_[a, b], None, BootstrapConfig(resamples=100))
    assert res.passing_set == []
    assert res.used_nrmse_fallback
    finite = {f: v for f, v in res.nrmse_values.items() if math.isfinite(v)}
    assert res.chosen is min(finite, key=lambda f: (finite[f], f.value))


def test_select_single_family():
    x = draw("Logistic", (197.54, 8.96), RngStream(3, 0), size=500)
    assert gof.select_model(x, ["Logistic"], BootstrapConfig(resamples=100)).chosen is Family.Logistic


def test_failed_fits_recorded():
    x = draw("Normal", (0.5, 1), RngStream(3, 0), size=300)  # has negatives
    res = gof.select_model(x, ["Gamma", "Normal"], BootstrapConfig(resamples=100))
    g = res.outcome("Gamma")
    assert g.fitted is None and g.ks.p_value == 0.0 and not g.passed and g.error
    assert res.chosen is Family.Normal
    with pytest.raises(AllFitsFailed):
        gof.select_model(x, ["Gamma", "Lognormal"], BootstrapConfig(resamples=100))


def test_tie_break_by_nrmse_then_name(monkeypatch):
    x = draw("Normal", (100, 10), RngStream(3, 0), size=300)

    def fake(fam, theta, n, resamples, seed, workers=1):
        return np.ones(resamples)  # every family gets p = 1

    monkeypatch.setattr(gof, "bootstrap_statistics", fake)
    res = gof.select_model(x, ["Logistic", "Normal", "Gamma"], BootstrapConfig(resamples=100))
    assert res.chosen is min(res.passing_set, key=lambda f: (res.nrmse_values[f], f.value))


def test_select_model_deterministic():
    x = draw("Weibull", (100, 2), RngStream(8, 0), size=400)
    cfg = BootstrapConfig(resamples=100, seed=3)
    fams = ["Weibull", "Gamma", "Rayleigh"]
    a, b = gof.select_model(x, fams, cfg), gof.select_model(x, fams, cfg)
    assert gof.format_gof_report(a) == gof.format_gof_report(b)


def test_report_format():
    x = draw("Normal", (10, 1), RngStream(0, 0), size=200)
    text = gof.format_gof_report(gof.select_model(x, ["Normal", "Logistic"], BootstrapConfig(resamples=100)))
    lines = text.splitlines()
    assert lines[0] == "family,ks_statistic,p_value,passed,nrmse,loglik"
    assert len(lines) == 4
    assert lines[-1].startswith("# chosen=") and "fallback=false" in lines[-1]


# --- two-sample ------------------------------------------------------------------------


def test_two_sample_examples():
    r = gof.ks_two_sample([1, 2, 3], [1, 2, 3])
    assert (r.statistic, r.p_value) == (0.0, 1.0)
    assert gof.ks_two_sample([1, 2], [3, 4]).statistic == 1.0
    assert gof.ks_two_sample([1, 2], [1.5, 2.5]).statistic == 0.5
    assert gof.ks_two_sample([1, 2], [1.5, 2.5]).n == 1.0
    with pytest.raises(EmptySample):
        gof.ks_two_sample([], [1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=40), st.lists(st.integers(0, 30), min_size=1, max_size=40))
def test_two_sample_statistic_matches_scipy(a, b):
    assert gof.ks_two_sample(a, b).statistic == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
