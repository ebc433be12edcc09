"""The frozen oracle values re-derived from their reference computations."""

import math

import pytest

from oracles import FROZEN, logit_py, optimal_price_closed_form, optimal_price_root


def test_binary_probability():
    assert logit_py([1.0, 0.0])[0] == pytest.approx(FROZEN["p_binary_v1"], abs=1e-15)
    assert math.log(logit_py([0.0, 0.0])[0]) == FROZEN["ln_half"]


@pytest.mark.parametrize("a,key", [(2.0, "p_star_a2"), (4.0, "p_star_a4")])
def test_optimal_price_two_ways(a, key):
    assert optimal_price_closed_form(a, 1.0) == pytest.approx(FROZEN[key], abs=1e-12)
    assert optimal_price_root(a, 1.0) == pytest.approx(FROZEN[key], abs=1e-12)


def test_hand_values():
    assert 0.8 * 1 + (-0.3) * 10 + 0.5 == FROZEN["utility_example"]
    assert -(0.02 * 50) / (-0.3) == FROZEN["premium_wtp"]
