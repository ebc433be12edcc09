"""Post-estimation economics: willingness to pay, price sensitivity, adoption."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChoiceScenario, ParameterVector, choice_probabilities
from .errors import EconomicValidityError, InputError, SchemaError

INVEST = "INVEST"
REJECT = "REJECT"


@dataclass(frozen=True)
class WtpReport:
    per_attribute_wtp: dict
    price_coefficient: float

    def lines(self) -> list[str]:
        return [f"wtp.{name} = {value!r}" for name, value in self.per_attribute_wtp.items()]


@dataclass(frozen=True)
class InvestmentDecision:
    attribute: str
    wtp: float
    monetized_benefit: float
    price_increase: float
    ratio: float
    decision: str
    indifferent: bool


def _require_negative_price(params: ParameterVector) -> float:
    b = params.price_coefficient
    if not b < 0:
        raise EconomicValidityError(
            f"price coefficient {b!r} is not negative; demand would slope upward"
        )
    return b


def wtp(params: ParameterVector) -> WtpReport:
    """Currency value of one unit of each non-price attribute, ``-beta_k / beta_price``."""
    b_price = _require_negative_price(params)
    schema = params.schema
    values = {schema.names[k]: float(-params.betas[k] / b_price) for k in schema.non_price_indices}
    return WtpReport(values, b_price)


def price_derivative(params: ParameterVector, scenario: ChoiceScenario, alt_index: int) -> float:
    """Own-price derivative ``beta_price * P_i * (1 - P_i)`` of an offered alternative."""
    if not 0 <= alt_index < len(scenario.alternatives):
        raise InputError(f"alternative {alt_index} is not an offered alternative")
    p = choice_probabilities(params, scenario)[alt_index]
    return float(params.price_coefficient * p * (1.0 - p))


def purchase_probability(params: ParameterVector, scenario: ChoiceScenario) -> float:
    if not scenario.includes_outside_option:
        raise InputError("purchase probability needs an outside option")
    p = choice_probabilities(params, scenario)
    # sum of inside shares, not 1 - P(outside): keeps tiny values exact
    return float(np.sum(p[:-1]))


def market_potential(params: ParameterVector, scenario: ChoiceScenario, population_size) -> float:
    """Expected number of adopters in a population of ``population_size``."""
    if population_size < 0:
        raise InputError("population size must be non-negative")
    return float(population_size * purchase_probability(params, scenario))


def investment_rule(params: ParameterVector, attribute, delta_attribute: float,
                    delta_price: float) -> InvestmentDecision:
    """Invest when the monetised improvement exceeds the price increase.

    The ratio ``wtp * delta_attribute / delta_price`` must be strictly above
    1; a ratio of exactly 1 is rejected and flagged as indifferent.
    """
    if not delta_price > 0:
        raise InputError("price increase must be positive")
    report = wtp(params)
    k = params.schema.index(attribute)
    if k == params.schema.price_index:
        raise SchemaError("the investment attribute cannot be price")
    name = params.schema.names[k]
    value = report.per_attribute_wtp[name]
    benefit = value * delta_attribute
    ratio = benefit / delta_price
    indifferent = bool(np.isclose(ratio, 1.0, rtol=1e-12, atol=0.0))
    decision = INVEST if ratio > 1.0 and not indifferent else REJECT
    return InvestmentDecision(name, value, benefit, float(delta_price), ratio, decision, indifferent)
