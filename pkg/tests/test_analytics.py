import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choiceforge.analytics import INVEST, REJECT, investment_rule, market_potential, price_derivative, purchase_probability, wtp
from choiceforge.core import AttributeSchema, ParameterVector, choice_probabilities, make_scenario
from choiceforge.errors import EconomicValidityError, InputError
from choiceforge.synth import named_spec
from oracles import central_difference

S = AttributeSchema(("q", "price"))


def test_wtp_definition():
    assert wtp(ParameterVector([0.5, -0.25], S)).per_attribute_wtp == {"q": 2.0}
    assert wtp(ParameterVector([0.0, -0.25], S)).per_attribute_wtp["q"] == 0.0


def test_wtp_report_line():
    assert wtp(ParameterVector([0.5, -0.25], S)).lines() == ["wtp.q = 2.0"]


@pytest.mark.parametrize("b", [0.0, 0.3])
def test_wtp_needs_negative_price(b):
    with pytest.raises(EconomicValidityError):
        wtp(ParameterVector([0.5, b], S))


def test_wtp_scale_example():
    p = named_spec("virtual-traveling-default").true_params
    a, b = wtp(p).per_attribute_wtp, wtp(p.scaled(3.7)).per_attribute_wtp
    assert all(abs(a[k] - b[k]) <= 1e-12 * max(1.0, abs(a[k])) for k in a)


def test_price_derivative_half():
    p = ParameterVector([0.0, -1.0], S)
    sc = make_scenario(S, [[0.0, 1.0], [0.0, 1.0]])
    assert price_derivative(p, sc, 0) == pytest.approx(-0.25, abs=1e-15)

    def prob(price):
        return choice_probabilities(p, make_scenario(S, [[0.0, price[0]], [0.0, 1.0]]))[0]

    assert central_difference(prob, [1.0], step=1e-6)[0] == pytest.approx(-0.25, abs=1e-8)


def test_price_derivative_zero_coefficient():
    p = ParameterVector([0.4, 0.0], S)
    sc = make_scenario(S, [[1.0, 3.0]], outside_option=True)
    assert price_derivative(p, sc, 0) == 0.0


def test_price_derivative_index_range():
    p = ParameterVector([0.4, -1.0], S)
    sc = make_scenario(S, [[1.0, 3.0]], outside_option=True)
    with pytest.raises(InputError):
        price_derivative(p, sc, 1)


def test_price_derivative_random_instances():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = ParameterVector([rng.normal(), -rng.uniform(0.05, 2.0)], S)
        rows = rng.uniform(0, 3, size=(3, 2))
        i = int(rng.integers(0, 3))

        def prob(price):
            r = rows.copy()
            r[i, 1] = price[0]
            return choice_probabilities(p, make_scenario(S, r, outside_option=True))[i]

        fd = central_difference(prob, [rows[i, 1]], step=1e-6)[0]
        d = price_derivative(p, make_scenario(S, rows, outside_option=True), i)
        assert d < 0
        assert d == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_market_potential_half():
    p = ParameterVector([1.0, -1.0], S)
    sc = make_scenario(S, [[2.0, 2.0]], outside_option=True)
    assert market_potential(p, sc, 10_000) == pytest.approx(5000.0, abs=1e-9)


def test_market_potential_vanishes():
    p = ParameterVector([0.0, -1.0], S)
    sc = make_scenario(S, [[0.0, 700.0]], outside_option=True)
    assert market_potential(p, sc, 10_000) < 1


def test_market_potential_cross_module():
    spec = named_spec("virtual-traveling-default")
    p = spec.true_params
    sc = make_scenario(p.schema, [[0.5, 100.0, 100.0, 3.0, 15.0]], outside_option=True)
    probs = choice_probabilities(p, sc)
    assert market_potential(p, sc, 10_000) == pytest.approx(10_000 * (1 - probs[-1]), abs=1e-9)


def test_market_potential_needs_outside():
    p = ParameterVector([1.0, -1.0], S)
    with pytest.raises(InputError):
        purchase_probability(p, make_scenario(S, [[1.0, 1.0], [0.0, 1.0]]))


def test_market_potential_monotone_in_price():
    p = named_spec("virtual-traveling-default").true_params
    values = [market_potential(p, make_scenario(p.schema, [[0.5, 100, 100, 3, c]], True), 1e6)
              for c in np.linspace(0, 100, 100)]
    assert np.all(np.diff(values) <= 0)


def test_invest_rule_examples():
    p = ParameterVector([0.5, -0.25], S)
    d = investment_rule(p, "q", 1.0, 1.0)
    assert (d.ratio, d.decision, d.indifferent) == (2.0, INVEST, False)
    d = investment_rule(p, "q", 0.4, 1.0)
    assert d.ratio == pytest.approx(0.8) and d.decision == REJECT
    d = investment_rule(p, "q", 0.5, 1.0)
    assert (d.ratio, d.decision, d.indifferent) == (1.0, REJECT, True)


def test_invest_rule_errors():
    with pytest.raises(EconomicValidityError):
        investment_rule(ParameterVector([0.5, 0.1], S), "q", 1.0, 1.0)
    with pytest.raises(InputError):
        investment_rule(ParameterVector([0.5, -0.1], S), "q", 1.0, 0.0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0.01, 5), st.floats(1e-3, 1e3))
def test_wtp_scale_invariance(betas, neg_price, c):
    schema = AttributeSchema(("a", "b", "c", "price"))
    p = ParameterVector(betas + [-neg_price], schema)
    a, b = wtp(p).per_attribute_wtp, wtp(p.scaled(c)).per_attribute_wtp
    for k in a:
        assert abs(a[k] - b[k]) <= 1e-12 * max(1.0, abs(a[k]))
