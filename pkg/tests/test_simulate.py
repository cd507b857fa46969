import numpy as np
import oracles
import pytest
from conftest import models
from hypothesis import given, settings
from hypothesis import strategies as st

from bmmpp import (
    BmmppError, BmmppModel, DegenerateError, ModelBounds, RngSpec, Trace, describe,
    read_trace_csv, sample_random_model, simulate_trace, validate, write_trace_csv,
)
from bmmpp.fit import sample_autocorr


def _batch_se(x, stat, n_batches=100):
    parts = np.array_split(x, n_batches)
    vals = np.array([stat(p) for p in parts])
    return vals.std(ddof=1) / np.sqrt(n_batches)


def test_same_seed_same_trace(k4):
    a = simulate_trace(k4, 5000, RngSpec(3, 1))
    b = simulate_trace(k4, 5000, RngSpec(3, 1))
    np.testing.assert_array_equal(a.t, b.t)
    np.testing.assert_array_equal(a.b, b.b)
    c = simulate_trace(k4, 5000, RngSpec(3, 2))
    assert not np.array_equal(a.t, c.t)


def test_seed_forms_agree(k2):
    a = simulate_trace(k2, 100, 5)
    b = simulate_trace(k2, 100, RngSpec(5))
    np.testing.assert_array_equal(a.t, b.t)
    with pytest.raises(TypeError):
        simulate_trace(k2, 10, "seed")


@given(models(), st.integers(1, 300), st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_trace_shape(m, n, seed):
    tr = simulate_trace(m, n, seed)
    assert len(tr) == n
    assert np.all(tr.t > 0)
    assert tr.b.min() >= 1 and tr.b.max() <= m.K


def test_moments_match_analytic(k2):
    tr = simulate_trace(k2, 400_000, RngSpec(11))
    rep = describe(k2)
    t, b = tr.t, tr.b.astype(float)
    checks = [
        (t.mean(), rep.mu1, _batch_se(t, np.mean)),
        (np.mean(t**2), rep.mu2, _batch_se(t, lambda x: np.mean(x**2))),
        (np.mean(t**3), rep.mu3, _batch_se(t, lambda x: np.mean(x**3))),
        (b.mean(), rep.beta[1], _batch_se(b, np.mean)),
        (np.mean(t * b), rep.eta, _batch_se(t * b, np.mean)),
        (sample_autocorr(t, 1), rep.rhoT[1], _batch_se(t, lambda x: sample_autocorr(x, 1))),
        (sample_autocorr(b, 1), rep.rhoB[1], _batch_se(b, lambda x: sample_autocorr(x, 1))),
    ]
    for emp, exact, se in checks:
        assert abs(emp - exact) < 4.5 * se


def test_pmf_matches(k4):
    tr = simulate_trace(k4, 200_000, RngSpec(2))
    emp = np.bincount(tr.b, minlength=5)[1:] / len(tr)
    exact = oracles.descriptors(k4)["pmf"]
    se = np.sqrt(exact * (1 - exact) / len(tr)) * 3  # inflation for dependence
    assert np.all(np.abs(emp - exact) < 4 * se)


def test_init_controls_first_interval(k2):
    # first interval mean is v (-D0)^{-1} e for start law v
    m_inv = np.linalg.inv(-np.array(k2.d0))
    ref = oracles.descriptors(k2)
    for init, v in (("stationary-pi", ref["pi"]), ("stationary-phi", ref["phi"]), (1, [0, 1])):
        first = np.array([simulate_trace(k2, 1, RngSpec(i), init).t[0] for i in range(4000)])
        exact = np.asarray(v) @ m_inv @ np.ones(2)
        assert abs(first.mean() - exact) < 4 * first.std() / np.sqrt(first.size)
    with pytest.raises(ValueError):
        simulate_trace(k2, 5, init="bogus")
    with pytest.raises(ValueError):
        simulate_trace(k2, 5, init=2)


def test_reducible_model_simulates():
    m = BmmppModel([[-3.0, 0.0], [1.0, -2.0]], [[3.0, 1.0]])
    tr = simulate_trace(m, 2000, 1)
    # stuck in phase 0 at rate 3
    assert tr.t.mean() == pytest.approx(1 / 3, rel=0.1)


def test_zero_rate_model_errors():
    m = BmmppModel([[-1.0, 1.0], [1.0, -1.0]], [[0.0, 0.0]])
    with pytest.raises(DegenerateError):
        simulate_trace(m, 10)
    with pytest.raises(ValueError):
        simulate_trace(BmmppModel([[-1.0, 1.0], [1.0, -2.0]], [[0.0, 1.0]]), 0)


def test_silent_phase():
    # phase 1 never emits: intervals straddle its visits
    m = BmmppModel([[-2.0, 1.0], [3.0, -3.0]], [[1.0, 0.0]])
    tr = simulate_trace(m, 100_000, 4)
    assert tr.t.mean() == pytest.approx(describe(m).mu1, rel=0.02)


def test_csv_round_trip(tmp_path, k4):
    tr = simulate_trace(k4, 500, 0)
    p = tmp_path / "t.csv"
    write_trace_csv(tr, p)
    back = read_trace_csv(p)
    np.testing.assert_allclose(back.t, tr.t, rtol=1e-11)
    np.testing.assert_array_equal(back.b, tr.b)
    tr.write_csv(p)
    assert len(Trace.read_csv(p)) == 500


@pytest.mark.parametrize(
    "t, b",
    [([1.0, -1.0], [1, 1]), ([1.0, np.inf], [1, 1]), ([1.0], [1, 2]), ([1.0], [0]),
     ([1.0], [1.5])],
)
def test_trace_validation(t, b):
    with pytest.raises(BmmppError):
        Trace(t, b)


def test_random_models_valid():
    gen = RngSpec(9).generator()
    for K in (1, 2, 3, 4):
        for _ in range(50):
            m = sample_random_model(K, gen)
            assert m.K == K and validate(m).ok and m.irreducible
    m = sample_random_model(2, 0, ModelBounds(symmetric=True))
    assert m.y == m.r
    with pytest.raises(ValueError):
        sample_random_model(2, 0, ModelBounds(switch=(0.0, 1.0)))
