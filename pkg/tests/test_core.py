import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choiceforge.core import (
    AttributeSchema,
    AttributeVector,
    ChoiceDataset,
    ChoiceObservation,
    ChoiceScenario,
    ParameterVector,
    choice_probabilities,
    log_likelihood,
    log_likelihood_gradient,
    log_likelihood_hessian,
    logit_probabilities,
    make_scenario,
    pack,
    simulate_choice,
    simulate_choices,
    systematic_utility,
    unpack,
)
from choiceforge.errors import InputError, SchemaError
from oracles import FROZEN, central_difference, logit_py, loglik_py

S2 = AttributeSchema(("x", "price"))


def test_schema_needs_one_price():
    with pytest.raises(SchemaError):
        AttributeSchema(("a", "b"))
    with pytest.raises(SchemaError):
        AttributeSchema(("price", "price"))


def test_attribute_vector_invariants():
    with pytest.raises(SchemaError):
        AttributeVector([1.0, 2.0, 3.0], S2)
    with pytest.raises(SchemaError):
        AttributeVector([1.0, -1.0], S2)
    with pytest.raises(SchemaError):
        AttributeVector([np.nan, 1.0], S2)


def test_first_constant_fixed():
    with pytest.raises(SchemaError):
        ParameterVector([1.0, -1.0], S2, [0.5, 0.0])


def test_utility_zero_weights():
    p = ParameterVector([0.0, 0.0], S2)
    assert systematic_utility(p, AttributeVector([3.0, 7.0], S2)) == 0.0


def test_utility_cancels():
    p = ParameterVector([1.0, -0.5], S2)
    assert systematic_utility(p, AttributeVector([2.0, 4.0], S2)) == 0.0


def test_utility_with_constant():
    p = ParameterVector([0.8, -0.3], S2, [0.0, 0.5])
    v = systematic_utility(p, AttributeVector([1.0, 10.0], S2), alt_index=1)
    assert v == pytest.approx(FROZEN["utility_example"], abs=1e-12)


def test_utility_schema_mismatch():
    p = ParameterVector([1.0, 1.0, -1.0], AttributeSchema(("a", "b", "price")))
    with pytest.raises(SchemaError):
        systematic_utility(p, AttributeVector([1.0, 1.0], S2))


def test_probabilities_symmetric():
    assert np.allclose(logit_probabilities([0.0, 0.0, 0.0]), 1 / 3, atol=1e-15)


@pytest.mark.parametrize("v", [(1.0, 0.0), (710.0, 709.0)])
def test_probabilities_binary(v):
    p = logit_probabilities(v)
    assert p[0] == pytest.approx(FROZEN["p_binary_v1"], abs=1e-6)
    assert p[1] == pytest.approx(1 - FROZEN["p_binary_v1"], abs=1e-6)


def test_scenario_needs_two_effective():
    alt = AttributeVector([1.0, 1.0], S2)
    with pytest.raises(InputError):
        ChoiceScenario((alt,), False)
    assert ChoiceScenario((alt,), True).n_effective == 2


def test_outside_option_is_last_with_zero_utility():
    p = ParameterVector([1.0, -1.0], S2)
    sc = make_scenario(S2, [[1.0, 1.0]], outside_option=True)
    assert np.allclose(choice_probabilities(p, sc), [0.5, 0.5], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=2, max_size=8), st.floats(-50, 50))
def test_probabilities_valid_and_translation_invariant(v, c):
    p = logit_probabilities(v)
    q = logit_probabilities(np.asarray(v) + c)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p >= 0)
    assert np.allclose(p, q, atol=1e-12, rtol=0)
    assert np.allclose(p, logit_py(v), atol=1e-12, rtol=0)


def test_probabilities_positive_within_700():
    p = logit_probabilities([700.0, -700.0 + 1e-9, 0.0])
    assert abs(p.sum() - 1.0) <= 1e-12
    p = logit_probabilities([350.0, -350.0])
    assert np.all(p > 0)


def _binary_data(n, x_rows, chosen):
    return ChoiceDataset(S2, np.asarray(x_rows, dtype=float).reshape(n, 2, 2), chosen, False)


def test_loglik_single_and_additive():
    p = ParameterVector([0.0, 0.0], S2)
    one = _binary_data(1, [[1, 1], [2, 2]], [0])
    two = _binary_data(2, [[1, 1], [2, 2]] * 2, [0, 1])
    assert log_likelihood(p, one) == pytest.approx(FROZEN["ln_half"], abs=1e-12)
    assert log_likelihood(p, two) == pytest.approx(2 * FROZEN["ln_half"], abs=1e-12)


def test_loglik_equal_utilities(random_instance):
    _, data = random_instance(3, n_obs=40)
    zero = ParameterVector(np.zeros(3), data.schema, np.zeros(3))
    assert log_likelihood(zero, data) == pytest.approx(-40 * math.log(4), abs=1e-10)


def test_loglik_matches_product_oracle(random_instance):
    params, data = random_instance(11, n_obs=50)
    expected = loglik_py(params.betas, params.alternative_constants, data.attributes, data.chosen, True)
    assert log_likelihood(params, data) == pytest.approx(expected, abs=1e-10)
    assert log_likelihood(params, data) <= 0


def test_loglik_weights(random_instance):
    params, data = random_instance(12, n_obs=20)
    w = np.full(20, 2.0)
    assert log_likelihood(params, data, weights=w) == pytest.approx(2 * log_likelihood(params, data), abs=1e-12)


def test_empty_dataset_rejected():
    with pytest.raises(InputError):
        ChoiceDataset(S2, np.zeros((0, 2, 2)), np.zeros(0, dtype=int))


def test_gradient_hand_value():
    data = _binary_data(1, [[3.0, 1.0], [1.0, 1.0]], [0])
    g = log_likelihood_gradient(ParameterVector([0.0, 0.0], S2, [0.0, 0.0]), data)
    assert g[0] == pytest.approx(3.0 - 0.5 * (3.0 + 1.0), abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(random_instance, seed):
    params, data = random_instance(seed, n_obs=60)
    theta = pack(params, data.n_alternatives)

    def f(t):
        return log_likelihood(unpack(t, data.schema), data)

    fd = central_difference(f, theta)
    g = log_likelihood_gradient(params, data)
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(fd).max()))


def test_hessian_matches_gradient_differences(random_instance):
    params, data = random_instance(5, n_obs=80)
    theta = pack(params, data.n_alternatives)

    def grad(t):
        return log_likelihood_gradient(unpack(t, data.schema), data)

    H = np.array([central_difference(lambda t: grad(t)[i], theta) for i in range(theta.size)])
    assert np.allclose(log_likelihood_hessian(params, data), H, rtol=1e-5, atol=1e-5)


def test_simulate_choice_deterministic():
    p = ParameterVector([1.0, -0.2], S2)
    sc = make_scenario(S2, [[1.0, 2.0], [0.5, 1.0]], outside_option=True)
    assert simulate_choice(p, sc, 42) == simulate_choice(p, sc, 42)


def test_simulated_strong_preference():
    picks = simulate_choices(np.tile([20.0, 0.0], (10000, 1)), 3)
    assert np.mean(picks == 0) >= 0.999


def test_simulated_coin_flip():
    picks = simulate_choices(np.zeros((10000, 2)), 4)
    assert abs(np.mean(picks == 0) - 0.5) <= 0.015


def test_simulation_matches_probabilities():
    v = np.array([0.3, -0.2, 1.1, 0.0])
    n = 100_000
    picks = simulate_choices(np.tile(v, (n, 1)), 9)
    freq = np.bincount(picks, minlength=4) / n
    assert np.all(np.abs(freq - logit_probabilities(v)) <= 4 / math.sqrt(n))


def test_dataset_observation_roundtrip(random_instance):
    _, data = random_instance(2, n_obs=10)
    again = ChoiceDataset.from_observations(data.observations)
    assert np.array_equal(again.attributes, data.attributes)
    assert np.array_equal(again.chosen, data.chosen)


def test_observation_index_range():
    sc = make_scenario(S2, [[1.0, 1.0]], outside_option=True)
    with pytest.raises(InputError):
        ChoiceObservation(sc, 2)
