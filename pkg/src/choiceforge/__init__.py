"""Discrete-choice toolkit for pricing and designing subscription services."""

from .analytics import InvestmentDecision, WtpReport, investment_rule, market_potential, price_derivative, wtp
from .chain import CausalChain, LinearCausalLink, compose, explain_effect, fit_chain, fit_link, propagate
from .core import (
    AttributeSchema,
    AttributeVector,
    ChoiceDataset,
    ChoiceObservation,
    ChoiceScenario,
    ParameterVector,
    choice_probabilities,
    log_likelihood,
    log_likelihood_gradient,
    simulate_choice,
    systematic_utility,
)
from .designer import DesignSolution, DesignSpace, optimize_design, optimize_price, premium_share, revenue_curve
from .errors import (
    ChoiceForgeError,
    CollinearityError,
    EconomicValidityError,
    IdentificationError,
    InputError,
    NonConvergenceError,
    SchemaError,
    SeparationError,
    SingularHessianError,
    UnboundedRevenueError,
)
from .estimation import fit_latent_class, fit_mixed_logit, fit_mnl, standard_errors
from .synth import GroundTruthSpec, generate_dataset, generate_scenarios, named_spec, recovery_report

__version__ = "0.1.0"
