import json

import numpy as np
import pytest
from conftest import models
from hypothesis import assume, given
from hypothesis import strategies as st

from bmmpp import (
    BmmppModel, InvalidModelError, MmppModel, ProbParam, ReducibleModelError, check,
    embedded_mmpp, from_prob_params, load_model, make_iid_batch, normalize_state_order,
    save_model, size_k_mmpp, sub_bmmpp2, to_prob_params, validate,
)


def test_reference_model_is_valid(k2, k4):
    assert validate(k2).ok and validate(k4).ok
    assert k2.K == 2 and k4.K == 4
    np.testing.assert_allclose(k2.generator.sum(axis=1), 0, atol=1e-14)


def test_accessors(k2):
    assert (k2.x, k2.y, k2.r, k2.u) == (-5.0, 2.0, 5.0, -10.0)
    np.testing.assert_array_equal(k2.w, [1.0, 2.0])
    np.testing.assert_array_equal(k2.q, [2.0, 3.0])
    np.testing.assert_array_equal(k2.D(2), np.diag([2.0, 3.0]))
    np.testing.assert_array_equal(k2.event_rates, [3.0, 5.0])


@pytest.mark.parametrize(
    "d0, dk, name",
    [
        ([[-5, -1], [5, -10]], [[4, 2], [2, 3]], "y >= 0"),
        ([[-5, 2], [-1, -10]], [[1, 2], [2, 9]], "r >= 0"),
        ([[0, 0], [5, -10]], [[0, 2], [0, 3]], "x < 0"),
        ([[-5, 2], [5, -10]], [[1, 2], [2, 4]], "row 1 sum of D0+...+DK == 0"),
        ([[-5, 2], [5, -10]], [[-1, 2], [4, 3]], "D1[0,0] >= 0"),
    ],
)
def test_validate_names_violation(d0, dk, name):
    rep = validate(BmmppModel(d0, dk))
    assert not rep.ok
    assert name in rep.names()
    with pytest.raises(InvalidModelError):
        check(BmmppModel(d0, dk))


def test_reducible_is_warning_only():
    m = BmmppModel([[-3, 0], [1, -2]], [[3, 1]])
    rep = validate(m)
    assert rep.ok and rep.warnings
    with pytest.raises(ReducibleModelError):
        m.require_irreducible()


def test_bad_shapes():
    with pytest.raises(InvalidModelError):
        BmmppModel([[1, 2, 3]], [[1, 2]])
    with pytest.raises(InvalidModelError):
        BmmppModel([[-1, 1], [1, -1]], [[1, 2, 3]])


def test_from_partial_closes_rows(k4):
    m = BmmppModel.from_partial(k4.d0, k4.dk[:-1])
    np.testing.assert_allclose(m.dk, k4.dk, atol=1e-14)


@given(models())
def test_prob_param_round_trip(m):
    p = to_prob_params(m)
    np.testing.assert_allclose(p.p120 + sum(p.p11), 1.0, atol=1e-12)
    back = from_prob_params(p)
    assert back.allclose(m, atol=1e-10)


def test_prob_param_errors():
    with pytest.raises(InvalidModelError):
        from_prob_params(ProbParam(1.0, 1.0, 0.5, 0.5, (0.6,), (0.5,)))
    with pytest.raises(InvalidModelError):
        from_prob_params(ProbParam(0.0, 1.0, 0.5, 0.5, (0.5,), (0.5,)))
    with pytest.raises(InvalidModelError):
        from_prob_params(ProbParam(1.0, 1.0, 0.5, 0.5, (0.5,), (0.25, 0.25, 0.0)))


@given(models())
def test_permutation_involution(m):
    assert m.permuted().permuted().allclose(m)
    n = normalize_state_order(m)
    assert n.x + n.y >= n.r + n.u
    assume(m.x + m.y != m.r + m.u)  # ties keep the input labelling
    assert normalize_state_order(m.permuted()).allclose(n)


@given(models(k_min=2))
def test_sub_and_size_k_processes(m):
    for i in range(1, m.K + 1):
        s = sub_bmmpp2(m, i)
        assert s.K == 2 and validate(s).ok
        np.testing.assert_allclose(s.event_rates, m.event_rates)
        g = size_k_mmpp(m, i)
        np.testing.assert_allclose((g.g0 + np.diag(g.g1)).sum(axis=1), 0, atol=1e-12)
    e = embedded_mmpp(m)
    np.testing.assert_allclose(e.g1, m.event_rates)


def test_iid_batch_construction():
    g = MmppModel.from_d0([[-3.0, 1.0], [2.0, -6.0]])
    m = make_iid_batch(g, [0.5, 0.3, 0.2])
    assert validate(m).ok
    np.testing.assert_allclose(m.dk / m.event_rates, [[0.5] * 2, [0.3] * 2, [0.2] * 2])
    with pytest.raises(InvalidModelError):
        make_iid_batch(g, [0.5, 0.6])


@given(models(), st.booleans())
def test_json_round_trip(tmp_path_factory, m, via_file):
    if via_file:
        p = tmp_path_factory.mktemp("m") / "m.json"
        save_model(m, p)
        back = load_model(p)
    else:
        back = BmmppModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert back.allclose(m, atol=0)


def test_from_dict_checks_k(k2):
    d = k2.to_dict()
    d["K"] = 3
    with pytest.raises(InvalidModelError):
        BmmppModel.from_dict(d)


def test_model_is_immutable(k2):
    with pytest.raises(ValueError):
        k2.d0[0, 0] = 1.0
