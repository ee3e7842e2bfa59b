import json
import math

import numpy as np
import pytest

from flrdt._rng import stream
from flrdt.dual.finite import FiniteInstance, finite_psi, finite_psi_S
from flrdt.errors import BoundaryViolation, NonpositiveExponent, OverflowGuard
from flrdt.oracle import exhaustive_primal

X = np.array([[0.6, 0.8], [-0.8, 0.6]])
Y = np.eye(2)


def tiny(**kw):
    d = dict(X=X, Y=Y, beta=30.0, s=-1, t=0.0, p=[1, 0.5, 0], q=[1, 0.5, 0], m_vec=[1, 0.5, 0])
    d.update(kw)
    return FiniteInstance(**d)


def test_t0_identity_bitwise():
    inst = tiny()
    a = finite_psi(inst, [10, 500], 3)
    b = finite_psi_S(inst, [10, 500], 3)
    assert a.value == b.value and a.std_error == b.std_error


def test_t1_endpoint_matches_enumeration():
    inst = tiny(t=1.0)
    ev = finite_psi_S(inst, [5, 4000], 4)
    G = stream(99, 0).standard_normal((4000, 2, 2))
    prim = -np.array([exhaustive_primal(X, Y, g) for g in G]) / math.sqrt(2)
    se = math.hypot(ev.std_error, prim.std(ddof=1) / math.sqrt(prim.size))
    assert abs(ev.value - prim.mean()) <= 3 * se


def test_t1_drops_interpolating_noise():
    # at t=1 only y.G x survives, so the lifting chains cannot matter
    a = finite_psi_S(tiny(t=1.0), [5, 300], 8)
    b = finite_psi_S(tiny(t=1.0, p=[1, 0.2, 0], q=[1, 0.9, 0]), [5, 300], 8)
    assert a.value == b.value


def test_positive_s_runs():
    ev = finite_psi(tiny(s=1, beta=2.0, t=0.5), [5, 200], 1)
    assert np.isfinite(ev.value) and ev.std_error > 0


def test_guards():
    with pytest.raises(OverflowGuard):
        finite_psi(tiny(beta=1e9), [5, 10], 0)
    with pytest.raises(BoundaryViolation):
        tiny(m_vec=[1, 0.5, 0.1])
    with pytest.raises(NonpositiveExponent):
        tiny(m_vec=[1, 0.0, 0])
    with pytest.raises(ValueError):
        tiny(t=1.5)
    with pytest.raises(ValueError):
        finite_psi(tiny(), [5], 0)


def test_json_fixture_format():
    text = json.dumps({"X": X.tolist(), "Y": Y.tolist(), "beta": 30.0, "s": -1, "t": 0.0,
                       "m": [1, 0.5, 0]})
    inst = FiniteInstance.from_json(text)
    assert inst.r == 1 and inst.n == 2 and inst.m == 2
    assert inst.p.tolist() == [1.0, 0.0, 0.0]


def test_draws_independent_of_call_order():
    a = finite_psi(tiny(t=0.3), [5, 50], 12).value
    finite_psi(tiny(t=0.7), [5, 50], 13)
    assert finite_psi(tiny(t=0.3), [5, 50], 12).value == a
