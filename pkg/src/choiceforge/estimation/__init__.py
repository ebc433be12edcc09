"""Estimators: MNL maximum likelihood, latent-class EM and mixed logit."""

from .latent_class import LatentClassConfig, LatentClassResult, fit_latent_class, mixture_log_likelihood
from .mixed import MixedLogitConfig, MixedLogitResult, fit_mixed_logit, halton_normal_draws, simulated_log_likelihood
from .mnl import EstimationResult, MnlConfig, check_identification, fit_mnl, standard_errors
from .optimizer import AscentResult, bfgs_maximize

__all__ = [
    "AscentResult", "EstimationResult", "LatentClassConfig", "LatentClassResult", "MixedLogitConfig",
    "MixedLogitResult", "MnlConfig", "bfgs_maximize", "check_identification", "fit_latent_class",
    "fit_mixed_logit", "fit_mnl", "halton_normal_draws", "mixture_log_likelihood",
    "simulated_log_likelihood", "standard_errors",
]
