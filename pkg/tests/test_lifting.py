import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flrdt.errors import BoundaryViolation, MonotonicityViolation, NonpositiveExponent, ParamsError
from flrdt.lifting import (
    LiftingParams,
    RandomFields,
    embed,
    non_lifted,
    noise_coefficients,
    partial_lift,
    validate_params,
)


def P(p, q, c):
    return LiftingParams(len(p) - 2, p, q, c)


def test_validate_accepts_monotone_chains():
    params = P([1, 0.9, 0.4, 0], [1, 0.8, 0.3, 0], [1, 1, 0.7, 0])
    assert validate_params(params) is params


def test_validate_rejects_increasing_p():
    with pytest.raises(MonotonicityViolation) as exc:
        validate_params(P([1, 0.4, 0.9, 0], [1, 0.8, 0.3, 0], [1, 1, 0.7, 0]))
    assert exc.value.index == 2


def test_validate_interior_exponent():
    params = P([1, 1, 0, 0], [1, 1, 0, 0], [1, 1, 0, 0])
    with pytest.raises(NonpositiveExponent) as exc:
        validate_params(params)
    assert exc.value.index == 2
    assert validate_params(params, allow_limit=True) is params


@pytest.mark.parametrize("p,c,index", [
    ([0.9, 0.5, 0.2, 0], [1, 1, 1, 0], 0),
    ([1, 0.5, 0.2, 0.1], [1, 1, 1, 0], 3),
    ([1, 0.5, 0.2, 0], [1, 2, 1, 0], 1),
    ([1, 0.5, 0.2, 0], [1, 1, 1, 0.5], 3),
])
def test_validate_boundaries(p, c, index):
    with pytest.raises(BoundaryViolation) as exc:
        validate_params(P(p, [1, 0.5, 0.2, 0], c))
    assert exc.value.index == index


def test_validate_length():
    with pytest.raises(ParamsError):
        validate_params(LiftingParams(2, [1, 0.5, 0], [1, 0.5, 0], [1, 1, 0]))


def test_noise_coefficients_substitution():
    nc = noise_coefficients(P([1, 0.9, 0.4, 0], [1, 0.8, 0.3, 0], [1, 1, 0.7, 0]))
    np.testing.assert_allclose(nc.b, np.sqrt([0.1, 0.5, 0.4]), rtol=1e-15)
    np.testing.assert_allclose(nc.cc, np.sqrt([0.2, 0.5, 0.3]), rtol=1e-15)
    np.testing.assert_allclose(nc.a, np.sqrt([0.28, 0.60, 0.12]), rtol=1e-14)


def test_noise_partial_and_level_one():
    nc = noise_coefficients(partial_lift(2, 1.0))
    for v in (nc.a, nc.b, nc.cc):
        np.testing.assert_array_equal(v, [0, 1, 0])
    nc = noise_coefficients(P([1, 0, 0], [1, 0, 0], [1, 1, 0]))
    for v in (nc.a, nc.b, nc.cc):
        np.testing.assert_array_equal(v, [1, 0])


def test_partial_and_nonlifted_configs():
    assert partial_lift(2, 0.5).c.tolist() == [1, 1, 0.5, 0]
    nl = non_lifted(2)
    assert nl.is_limit and nl.p.tolist() == [1, 1, 0, 0]


def test_json_roundtrip():
    params = P([1, 0.9, 0.4, 0], [1, 0.8, 0.3, 0], [1, 1, 0.7, 0])
    d = json.loads(params.to_json())
    assert set(d) == {"r", "p", "q", "c"}
    assert LiftingParams.from_json(params.to_json()) == params
    with pytest.raises(ParamsError):
        LiftingParams.from_dict({"r": 2, "p": [1, 0]})


def test_random_fields_shapes():
    f = RandomFields.sample(2, 5, 3, np.random.default_rng(0))
    assert f.u4.shape == (3,) and f.u2.shape == (3, 5) and f.h.shape == (3, 3)


@st.composite
def chains(draw, r_max=4):
    r = draw(st.integers(1, r_max))
    def chain():
        inner = sorted(draw(st.lists(st.floats(0, 1), min_size=r, max_size=r)), reverse=True)
        return [1.0] + inner + [0.0]
    c = [1.0, 1.0] + draw(st.lists(st.floats(0.01, 50), min_size=r - 1, max_size=r - 1)) + [0.0]
    return P(chain(), chain(), c)


@given(chains())
def test_telescoping(params):
    validate_params(params)
    nc = noise_coefficients(params)
    assert abs(np.sum(nc.b ** 2) - 1) < 1e-12
    assert abs(np.sum(nc.cc ** 2) - 1) < 1e-12
    assert abs(np.sum(nc.b[1:] ** 2) - params.p[1]) < 1e-12
    p, q = params.p, params.q
    np.testing.assert_allclose(nc.a ** 2, p[:-1] * q[:-1] - p[1:] * q[1:], atol=1e-14)


@settings(max_examples=50)
@given(chains(r_max=3))
def test_embed_inserts_zero_level(params):
    up = embed(params)
    validate_params(up)
    a, b = noise_coefficients(params), noise_coefficients(up)
    r = params.r
    # the new level r+1 carries no noise, the last level moves down one slot
    for x, y in ((a.a, b.a), (a.b, b.b), (a.cc, b.cc)):
        np.testing.assert_allclose(y[:r], x[:r], atol=1e-15)
        assert y[r] == 0.0
        np.testing.assert_allclose(y[r + 1], x[r], atol=1e-15)
