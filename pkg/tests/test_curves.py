import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seisgrid.curves import (
    ComponentKind,
    CurveConfigError,
    FragilityCurve,
    RestorationCurve,
    VoltageClass,
    curves_from_list,
    default_curves,
    failure_probability,
    fit_lognormal,
    normal_cdf,
    normal_ppf,
    sample_failure,
    sample_restoration_day,
    voltage_class,
)


def erf_cdf(x):
    """Independent oracle: standard normal CDF from the error function."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def bisect_ppf(u, lo=-40.0, hi=40.0):
    mp.mp.dps = 40
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mp.ncdf(mid) < u:
            lo = mid
        else:
            hi = mid
    return float(lo)


@pytest.mark.parametrize(
    "kv, cls",
    [(13.2, VoltageClass.LOW), (149.999, VoltageClass.LOW), (150, VoltageClass.MEDIUM), (349.9, VoltageClass.MEDIUM),
     (350, VoltageClass.HIGH), (500, VoltageClass.HIGH), (765, VoltageClass.HIGH)],
)
def test_voltage_class(kv, cls):
    assert voltage_class(kv) == cls


@pytest.mark.parametrize("kv", [13.1, 800, -5])
def test_voltage_class_out_of_range(kv):
    with pytest.raises(ValueError):
        voltage_class(kv)


def test_failure_probability_examples():
    c = FragilityCurve(0.5, 0.4)
    assert failure_probability(c, 0.5) == 0.5
    assert failure_probability(c, 0.0) == 0.0
    # frozen from the erf/mpmath oracle: Phi(ln 2 / 0.4)
    assert failure_probability(c, 1.0) == pytest.approx(0.9584404291295915, abs=1e-12)
    assert failure_probability(c, 1.0) == pytest.approx(erf_cdf(math.log(2) / 0.4), abs=1e-12)


@pytest.mark.parametrize("k", [-2, -1, 1, 2])
def test_cdf_at_beta_multiples(k):
    c = FragilityCurve(0.7, 0.55)
    pga = 0.7 * math.exp(k * 0.55)
    assert failure_probability(c, pga) == pytest.approx(erf_cdf(k), abs=1e-9)


def test_infinite_median_never_fails():
    c = FragilityCurve(math.inf, 0.5)
    assert failure_probability(c, 5.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(
    median=st.floats(0.01, 5), beta=st.floats(0.01, 2),
    a=st.floats(0, 10), b=st.floats(0, 10),
)
def test_fragility_monotone_bounded(median, beta, a, b):
    c = FragilityCurve(median, beta)
    lo, hi = sorted((a, b))
    pl, ph = failure_probability(c, lo), failure_probability(c, hi)
    assert 0 <= pl <= ph <= 1
    assert failure_probability(c, median) == 0.5


@settings(max_examples=300, deadline=None)
@given(u=st.floats(1e-6, 1 - 1e-6))
def test_phi_round_trip(u):
    assert abs(normal_cdf(normal_ppf(u)) - u) < 1e-10


def test_ppf_matches_bisection_oracle():
    for u in (1e-6, 0.01, 0.3, 0.6, 0.99):
        assert normal_ppf(u) == pytest.approx(bisect_ppf(u), abs=1e-9)


def test_sample_failure_extremes():
    rng = np.random.default_rng(0)
    assert not any(sample_failure(FragilityCurve(0.5, 0.4), 0.0, rng) for _ in range(1000))
    sure = FragilityCurve(0.01, 0.01)
    assert all(sample_failure(sure, 5.0, rng) for _ in range(1000))


def test_sample_failure_frequency():
    c = FragilityCurve(0.5, 0.6)
    p = failure_probability(c, 0.4)
    rng = np.random.default_rng(123)
    n = 100_000
    hits = sum(sample_failure(c, 0.4, rng) for _ in range(n))
    assert abs(hits / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_restoration_examples():
    c = RestorationCurve(37.3, 0.5)
    assert c.day_for_quantile(0.5) == 38
    hv = default_curves().restoration(ComponentKind.TRANSFORMER, VoltageClass.HIGH)
    assert (hv.median_days, hv.beta) == (400.0, 0.3)
    # oracle: 400 * exp(0.3 * Phi^-1(0.6)) = 431.587 -> ceil 432
    assert math.ceil(400 * math.exp(0.3 * bisect_ppf(0.6))) == 432
    assert hv.day_for_quantile(0.6) == 432


def test_restoration_degenerate_beta():
    c = RestorationCurve(7.0, 0.0)
    assert set(c.day_for_quantile(np.linspace(0.001, 0.999, 50)).tolist()) == {7}


def test_restoration_day_at_least_one():
    c = RestorationCurve(1.0, 2.0)
    assert c.day_for_quantile(0.0) == 1
    assert c.day_for_quantile(1e-9) == 1


def test_sample_restoration_day_uses_one_uniform():
    c = RestorationCurve(30.0, 0.5)
    u = np.random.default_rng(5).random()
    assert sample_restoration_day(c, np.random.default_rng(5)) == c.day_for_quantile(u)


@settings(max_examples=100, deadline=None)
@given(median=st.floats(1, 500), beta=st.floats(0, 1.5), a=st.floats(0, 1, exclude_max=True),
       b=st.floats(0, 1, exclude_max=True))
def test_restoration_monotone_in_u(median, beta, a, b):
    c = RestorationCurve(median, beta)
    lo, hi = sorted((a, b))
    assert 1 <= c.day_for_quantile(lo) <= c.day_for_quantile(hi)


def test_fit_closed_forms():
    assert fit_lognormal([3.0, 3.0, 3.0]) == pytest.approx((3.0, 0.0))
    median, beta = fit_lognormal([math.e, math.e**3])
    assert median == pytest.approx(math.e**2)
    assert beta == pytest.approx(math.sqrt(2))


def test_fit_recovers_generating_parameters():
    rng = np.random.default_rng(7)
    samples = 100.0 * np.exp(0.5 * rng.standard_normal(100_000))
    median, beta = fit_lognormal(samples)
    assert median == pytest.approx(100.0, rel=0.02)
    assert beta == pytest.approx(0.5, rel=0.02)


def test_fit_converges_with_sample_size():
    rng = np.random.default_rng(11)
    errors = []
    for n in (100, 10_000, 1_000_000):
        median, beta = fit_lognormal(60.0 * np.exp(0.8 * rng.standard_normal(n)))
        errors.append(abs(math.log(median / 60.0)) + abs(beta - 0.8))
    assert errors[2] < errors[0]


@pytest.mark.parametrize("bad", [[1.0], [], [1.0, 0.0], [2.0, -1.0]])
def test_fit_errors(bad):
    with pytest.raises(ValueError):
        fit_lognormal(bad)


def test_default_table_is_total():
    curves = default_curves()
    assert len(dict(curves.items())) == 9


def test_missing_entry_named():
    entries = [e for e in default_curves().to_list()
               if not (e["component"] == "disconnect_switch" and e["voltage"] == "high")]
    with pytest.raises(CurveConfigError, match=r"\(disconnect_switch, high\)"):
        curves_from_list(entries)


def test_curve_round_trip():
    curves = default_curves()
    again = curves_from_list(curves.to_list())
    assert again.to_list() == curves.to_list()


@pytest.mark.parametrize("frag", [(0.0, 0.5), (-1.0, 0.5), (0.5, -0.1), (0.5, math.inf)])
def test_invalid_fragility(frag):
    with pytest.raises(CurveConfigError):
        FragilityCurve(*frag)
