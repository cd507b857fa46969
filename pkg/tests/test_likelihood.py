import numpy as np
import oracles
import pytest
from conftest import models
from hypothesis import given, settings
from scipy.linalg import expm
from scipy.stats import poisson

from bmmpp import (
    BmmppError, BmmppModel, ConvergenceError, RngSpec, Trace, em_fit, loglik, simulate_trace,
)
from bmmpp.likelihood import e_step, m_step


def brute_loglik(model, trace, alpha0):
    d0, dks = oracles.mats(model)
    v = np.asarray(alpha0, float)
    total = 0.0
    for t, b in zip(trace.t, trace.b):
        v = v @ expm(d0 * t) @ dks[b - 1]
        s = v.sum()
        total += np.log(s)
        v = v / s
    return total


@given(models())
@settings(max_examples=30)
def test_matches_dense_product(m):
    tr = simulate_trace(m, 40, 1)
    phi = oracles.stationary(m)[0]
    assert loglik(m, tr).loglik == pytest.approx(brute_loglik(m, tr, phi), rel=1e-10, abs=1e-10)
    lv = loglik(m, tr, alpha0=[1.0, 0.0])
    assert lv.loglik == pytest.approx(brute_loglik(m, tr, [1.0, 0.0]), rel=1e-10, abs=1e-10)
    assert lv.log_scales.sum() == pytest.approx(lv.loglik)


def test_poisson_reduction():
    # equal event rates and batch laws: an iid compound Poisson stream
    lam, p = 3.0, np.array([0.7, 0.3])
    m = BmmppModel([[-lam - 1.0, 1.0], [2.0, -lam - 2.0]], np.outer(p * lam, [1.0, 1.0]))
    tr = simulate_trace(m, 500, 2)
    want = np.sum(np.log(lam) - lam * tr.t + np.log(p[tr.b - 1]))
    assert float(loglik(m, tr)) == pytest.approx(want, rel=1e-12)


def test_long_trace_does_not_underflow(k4):
    tr = simulate_trace(k4, 50_000, 0)
    val = loglik(k4, tr).loglik
    assert np.isfinite(val) and val / len(tr) == pytest.approx(
        loglik(k4, Trace(tr.t[:25_000], tr.b[:25_000])).loglik / 25_000, rel=0.05)


def test_trace_checks(k2):
    with pytest.raises(BmmppError):
        loglik(k2, Trace([1.0, 2.0], [1, 3]))
    # a phase that cannot emit size 2 from a start concentrated there
    m = BmmppModel([[-2.0, 1.0], [1.0, -2.0]], [[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(BmmppError):
        loglik(m, Trace([1.0], [2]))


def test_e_step_counts(k4):
    tr = simulate_trace(k4, 300, 3)
    st = e_step(k4, tr, oracles.stationary(k4)[0])
    # expected sojourn adds up to the observed time, emissions to the counts
    assert st.sojourn.sum() == pytest.approx(tr.t.sum(), rel=1e-10)
    np.testing.assert_allclose(st.emissions.sum(axis=1), np.bincount(tr.b, minlength=5)[1:],
                               rtol=1e-10)
    assert st.start.sum() == pytest.approx(1.0)
    assert np.all(st.switches >= 0)


def test_em_step_improves(k2):
    tr = simulate_trace(k2, 400, 5)
    start = BmmppModel([[-6.0, 1.0], [4.0, -9.0]], [[2.0, 3.0], [3.0, 2.0]])
    a0 = oracles.stationary(start)[0]
    st = e_step(start, tr, a0)
    nxt = m_step(st)
    assert brute_loglik(nxt, tr, st.start) >= st.loglik - 1e-9


def test_em_fit_monotone(k2):
    tr = simulate_trace(k2, 400, 5)
    start = BmmppModel([[-6.0, 1.0], [4.0, -9.0]], [[2.0, 3.0], [3.0, 2.0]])
    res = em_fit(tr, 2, start, max_iter=200, tol=1e-8)
    hist = np.array(res.loglik_trace)
    assert np.all(np.diff(hist) >= -1e-8 * np.abs(hist[1:]))
    assert loglik(res.model, tr).loglik > loglik(start, tr).loglik
    assert res.method == "em"


def test_em_recovers_poisson_rate():
    tr = Trace(np.full(50, 0.5) * np.linspace(0.5, 1.5, 50), np.ones(50, dtype=int))
    start = BmmppModel([[-2.5, 0.5], [0.5, -1.5]], [[2.0, 1.0]])
    res = em_fit(tr, 1, start, max_iter=2000, tol=1e-10)
    # the MLE of a single Poisson rate is n / sum(t); a two-phase fit can only do better
    lam = len(tr) / tr.t.sum()
    pois = np.sum(np.log(poisson.pmf(0, lam * tr.t) * lam))
    assert res.loglik_trace[-1] >= pois - 1e-6


def test_em_arguments(k2):
    tr = simulate_trace(k2, 50, 0)
    with pytest.raises(ValueError):
        em_fit(tr, 2)
    with pytest.raises(ValueError):
        em_fit(tr, 3, k2)


def test_em_decrease_raises(k2, monkeypatch):
    import bmmpp.likelihood as lk

    tr = simulate_trace(k2, 100, 0)
    real = lk.e_step
    calls = {"n": 0}

    def worse(model, trace, alpha0):
        st = real(model, trace, alpha0)
        calls["n"] += 1
        st.loglik -= 10.0 * calls["n"]
        return st

    monkeypatch.setattr(lk, "e_step", worse)
    with pytest.raises(ConvergenceError):
        em_fit(tr, 2, k2, max_iter=5)


def test_em_is_deterministic(k2):
    tr = simulate_trace(k2, 200, RngSpec(7))
    a = em_fit(tr, 2, k2, max_iter=30).model
    b = em_fit(tr, 2, k2, max_iter=30).model
    assert a.allclose(b, atol=0)
