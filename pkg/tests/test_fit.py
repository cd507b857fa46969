import numpy as np
import pytest
from conftest import models
from hypothesis import given, settings
from hypothesis import strategies as st

from bmmpp import (
    EXAMPLE_K2, BmmppError, EmpiricalMoments, FitConfig, RngSpec, Trace, compare_reports, cov_corr_TB,
    describe, empirical_descriptors, empirical_moments, fit, fit_moments, moment_set, rho_B,
    simulate_trace, validate,
)
from bmmpp.fit import collapse, sample_autocorr, sub_moment_coeffs

FAST = FitConfig(multistart=12)


def test_empirical_moments_by_hand():
    tr = Trace([1.0, 2.0, 3.0, 2.0], [1, 2, 3, 1])
    em = empirical_moments(tr)
    assert em.K == 3 and em.n == 4
    assert em.mu1 == 2.0 and em.mu2 == pytest.approx(18 / 4) and em.mu3 == pytest.approx(44 / 4)
    # deviations (-1, 0, 1, 0), variance 1/2, lag-1 products sum to 0
    assert em.rhoT1 == 0.0
    # size-1 events are labelled 1, all others 2
    assert em.beta1 == (pytest.approx(6 / 4), pytest.approx(7 / 4))
    assert em.eta[0] == pytest.approx((1 + 4 + 6 + 2) / 4)
    assert em.cv == pytest.approx(np.sqrt(0.5) / 2)


def test_sample_autocorr_alternating():
    x = np.tile([1.0, -1.0], 50)
    assert sample_autocorr(x, 1) == pytest.approx(-1.0)
    assert sample_autocorr(x, 2) == pytest.approx(1.0)
    with pytest.raises(BmmppError):
        sample_autocorr(np.ones(5), 1)
    with pytest.raises(ValueError):
        sample_autocorr(x, 100)


def test_collapse():
    np.testing.assert_array_equal(collapse([1, 2, 3, 2], 2), [2, 1, 2, 1])


def test_too_short_trace():
    with pytest.raises(BmmppError):
        empirical_moments(Trace([1.0, 2.0, 3.0], [1, 1, 1]))
    with pytest.raises(BmmppError):
        empirical_moments(Trace([1.0] * 5, [1, 2, 1, 2, 3]), K=2)


@given(models(k_max=1))
def test_sub_moment_coeffs_are_affine(m):
    (b0, bw, bq), (e0, ew, eq) = sub_moment_coeffs(m.d0)
    rates = m.event_rates
    for frac in ((0.3, 0.6), (0.0, 1.0), (0.9, 0.1)):
        w, q = frac[0] * rates[0], frac[1] * rates[1]
        ms = moment_set(type(m).from_partial(m.d0, [(w, q)]))
        assert ms.beta1[0] == pytest.approx(b0 + bw * w + bq * q, rel=1e-10)
        assert ms.eta[0] == pytest.approx(e0 + ew * w + eq * q, rel=1e-9)


def test_exact_moments_are_reproduced(k4):
    em = EmpiricalMoments.from_moment_set(moment_set(k4))
    res = fit_moments(em, 4, FAST)
    got = moment_set(res.model).as_array()
    np.testing.assert_allclose(got, moment_set(k4).as_array(), rtol=1e-6)
    assert len(res.stages) == 4 and res.method == "moments/general"
    assert max(res.objectives) < 1e-12


def test_fit_on_trace(k2):
    tr = simulate_trace(k2, 300, RngSpec())
    res = fit(tr, 2, FitConfig(multistart=30))
    assert validate(res.model).ok
    emp = res.empirical.moment_set().as_array()
    got = moment_set(res.model).as_array()
    np.testing.assert_allclose(got, emp, rtol=1e-2)
    d = res.to_dict()
    assert d["model"]["K"] == 2 and d["config"]["multistart"] == 30


def test_fit_is_deterministic(k2):
    tr = simulate_trace(k2, 300, RngSpec(4))
    a = fit(tr, 2, FAST).model
    b = fit(tr, 2, FAST).model
    assert a.allclose(b, atol=0)


def test_infeasible_trace_still_fits():
    # nearly deterministic gaps: cv < 1 lies outside every MMPP_2
    tr = Trace(np.full(200, 1.0) + np.linspace(0, 0.1, 200), np.ones(200, dtype=int))
    res = fit(tr, 1, FAST)
    assert validate(res.model).ok
    assert describe(res.model).cv >= 1 - 1e-9


def test_iid_variant_decorrelates(k4):
    tr = simulate_trace(k4, 2000, RngSpec(1))
    res = fit(tr, 4, FitConfig(multistart=12, variant="iid-batch"))
    assert abs(cov_corr_TB(res.model)[1]) < 1e-10
    assert abs(rho_B(res.model, 1)) < 1e-10
    assert res.method == "moments/iid-batch"


@pytest.mark.parametrize("kw", [{"tau": 0.0}, {"multistart": 0}, {"variant": "x"}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        FitConfig(**kw)


def test_config_rng_from_dict():
    assert FitConfig(rng={"seed": 3, "stream": 1}).rng == RngSpec(3, 1)


def test_k_mismatch(k2):
    em = EmpiricalMoments.from_moment_set(moment_set(k2))
    with pytest.raises(ValueError):
        fit_moments(em, 3)


@given(st.integers(0, 1000))
@settings(max_examples=20)
def test_empirical_descriptors_consistent(seed):
    tr = simulate_trace(EXAMPLE_K2, 400, seed)
    rep = empirical_descriptors(tr, 2)
    em = empirical_moments(tr, 2)
    assert rep.mu1 == pytest.approx(em.mu1)
    assert rep.rhoT[1] == pytest.approx(em.rhoT1)
    assert sum(rep.pmfB) == pytest.approx(1.0)
    # with K = 2 the collapsed labels are the labels themselves
    assert rep.beta1_sub[0] == pytest.approx(rep.beta[1])


def test_compare_reports(k2):
    tr = simulate_trace(k2, 1000, 0)
    rows = compare_reports(empirical_descriptors(tr, 2), describe(k2))
    names = [r[0] for r in rows]
    assert "mu1" in names and "eta" in names
    for name, emp, est, rel in rows:
        if name == "mu1":
            assert rel == pytest.approx(abs(est - emp) / emp)
