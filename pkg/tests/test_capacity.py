import json
import math

import numpy as np
import pytest

from flrdt.capacity import CapacityResult, capacity_bisect, capacity_curve, dual_value_at_alpha
from flrdt.dual.ground import ModelSpec
from flrdt.errors import BadBracket
from flrdt.lifting import non_lifted
from flrdt.saddle import SolverConfig

NL = SolverConfig(mode="nonlifted")
PA = SolverConfig(mode="partial")


def sphere(kappa=0.0):
    return ModelSpec.perceptron("sphere", kappa, 1.0, 100)


def binary(kappa=0.0):
    return ModelSpec.perceptron("binary", kappa, 1.0, 100)


@pytest.mark.parametrize("alpha,sign", [(1.5, -1), (2.5, 1)])
def test_sphere_sign_around_two(alpha, sign):
    v = dual_value_at_alpha(sphere(), 2, alpha, NL).value
    assert np.sign(v) == sign


@pytest.mark.parametrize("alpha", [0.5, 1.5, 2.5])
def test_nonlifted_reduces_to_first_moment_bounds(alpha):
    # c -> 0 leaves E||.|| terms: sqrt(alpha/2) - E|g| for binary, - 1 for sphere
    s = dual_value_at_alpha(sphere(), 2, alpha, NL).value
    b = dual_value_at_alpha(binary(), 2, alpha, NL).value
    assert s == pytest.approx(math.sqrt(alpha / 2) - 1, abs=1e-8)
    assert b == pytest.approx(math.sqrt(alpha / 2) - math.sqrt(2 / math.pi), abs=1e-8)


def test_nonlifted_binary_capacity_closed_form():
    res = capacity_bisect(binary(), 2, (1.2, 1.35), 1e-4, NL)
    assert res.ok
    assert res.bracket[0] <= 4 / math.pi <= res.bracket[1]


def test_bracket_is_validated():
    with pytest.raises(BadBracket):
        capacity_bisect(sphere(), 2, (1.9, 1.9), config=NL)
    with pytest.raises(BadBracket):
        capacity_bisect(sphere(), 2, (2.2, 3.0), config=NL)
    with pytest.raises(BadBracket):
        capacity_bisect(sphere(), 2, (1.0, 1.5), config=NL)


def test_sphere_capacity_and_sign_invariant():
    res = capacity_bisect(sphere(), 2, (1.5, 2.5), 1e-3, NL)
    assert res.alpha_star == pytest.approx(2.0, abs=1e-3)
    lo = [e for e in res.evaluations if e["alpha"] == res.bracket[0]]
    hi = [e for e in res.evaluations if e["alpha"] == res.bracket[1]]
    assert lo[0]["value"] <= 0 < hi[0]["value"]


def test_empty_grid():
    assert capacity_curve(sphere(), 2, [], (1.0, 3.0), config=NL) == []


def test_curve_keeps_failed_points():
    def bracket(kappa):
        return (2.2, 3.0) if kappa == 0.0 else (0.3, 3.0)
    out = capacity_curve(sphere(), 2, [0.0, 0.5], bracket, 1e-3, NL)
    assert len(out) == 2
    assert math.isnan(out[0].alpha_star) and out[0].flags
    assert np.isfinite(out[1].alpha_star) and not out[1].flags
    assert out[1].alpha_star < 2.0


def test_binary_partial_signs():
    assert dual_value_at_alpha(binary(), 2, 0.95, PA).value <= 0
    assert dual_value_at_alpha(binary(), 2, 1.05, PA).value > 0


def test_warm_start_does_not_move_the_answer():
    cold = capacity_bisect(sphere(), 2, (1.5, 2.5), 1e-3, NL)
    warm = capacity_bisect(sphere(), 2, (1.5, 2.5), 1e-3, NL, init=non_lifted(2))
    assert warm.alpha_star == cold.alpha_star


def test_result_json_roundtrip():
    res = capacity_bisect(sphere(), 2, (1.5, 2.5), 1e-2, NL)
    d = json.loads(res.to_json())
    assert d["alpha_star"] == res.alpha_star and d["r"] == 2
    assert isinstance(res, CapacityResult) and d["method"] == "quadrature"
