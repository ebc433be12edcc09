"""Mixed logit with independent normal coefficients, by simulated ML.

Random coefficients are ``beta_k = mean_k + stddev_k * xi`` with ``xi`` taken
from a scrambled Halton sequence (one prime base per random coefficient) and
mapped through the normal quantile function.  Observation ``n`` uses points
``n * R .. (n + 1) * R - 1`` of the sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm, qmc

from ..core import (ChoiceDataset, ParameterVector, _lastaxis_max, _lastaxis_sum, design_tensor, log_likelihood,
                    pack, unpack)
from ..errors import InputError, SeparationError, SingularHessianError
from .mnl import MnlConfig, Z_95, _column_scale, check_identification, covariance_from_hessian, maximize_mnl, numeric_hessian
from .optimizer import bfgs_maximize


@dataclass(frozen=True)
class MixedLogitConfig:
    max_iterations: int = 500
    gtol: float = 1e-6
    beta_cap: float = 50.0
    fit_constants: bool = True
    seed: int = 0
    fix_stddev_at_zero: bool = False


@dataclass(frozen=True, eq=False)
class MixedLogitResult:
    """Means for every coefficient, standard deviations for the random ones.

    ``standard_errors`` follows :attr:`names`: betas, constants, then one
    entry per random coefficient's stddev.
    """

    params: ParameterVector
    stddev_betas: np.ndarray
    random_coefficients: tuple
    draws_per_observation: int
    simulated_log_likelihood: float
    standard_errors: np.ndarray
    iterations: int
    converged: bool
    gradient_norm: float
    n_observations: int
    fit_constants: bool = True

    @property
    def mean_betas(self) -> np.ndarray:
        return self.params.betas

    @property
    def names(self) -> list[str]:
        names = list(self.params.schema.names)
        if self.fit_constants:
            names += [f"asc_{j}" for j in range(1, self.params.n_alternatives)]
        return names + [f"sd_{r}" for r in self.random_coefficients]

    @property
    def estimates(self) -> np.ndarray:
        theta = pack(self.params, self.params.n_alternatives)
        if not self.fit_constants:
            theta = theta[: len(self.params.schema)]
        idx = [self.params.schema.index(r) for r in self.random_coefficients]
        return np.concatenate([theta, self.stddev_betas[idx]])

    def confidence_interval(self, z: float = Z_95):
        est = self.estimates
        return est - z * self.standard_errors, est + z * self.standard_errors

    def summary(self) -> str:
        lines = ["model: mixed",
                 f"observations: {self.n_observations}",
                 f"draws per observation: {self.draws_per_observation}",
                 f"simulated log-likelihood: {self.simulated_log_likelihood!r}",
                 f"converged: {self.converged} after {self.iterations} iterations"]
        for name, est, se in zip(self.names, self.estimates, self.standard_errors):
            lines.append(f"{name:<14}{est:>16.6g}{se:>16.6g}")
        return "\n".join(lines)


def halton_normal_draws(n_obs: int, n_draws: int, dim: int, seed: int = 0) -> np.ndarray:
    """Standard-normal draws of shape (n_obs, n_draws, dim)."""
    if n_draws < 1:
        raise InputError("n_draws must be at least 1")
    if dim == 0:
        return np.zeros((n_obs, n_draws, 0))
    sampler = qmc.Halton(d=dim, scramble=True, rng=np.random.default_rng(seed))
    u = sampler.random(n_obs * n_draws)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    return norm.ppf(u).reshape(n_obs, n_draws, dim)


class SimulatedLikelihood:
    """Simulated log-likelihood and its analytic gradient for fixed draws.

    Parameter vector layout: betas (means), free constants, stddevs of the
    random coefficients.
    """

    def __init__(self, data: ChoiceDataset, random_idx, draws):
        self.data = data
        self.random_idx = np.asarray(random_idx, dtype=int)
        self.draws = draws
        self.z = design_tensor(data)
        self.width = self.z.shape[2]
        n, j, _ = data.attributes.shape
        self.xr = np.zeros((n, data.n_effective, self.random_idx.size))
        self.xr[:, :j, :] = data.attributes[:, :, self.random_idx]
        self.rows = np.arange(n)

    def split(self, theta):
        return theta[: self.width], theta[self.width:]

    def _draw_probabilities(self, theta):
        base_theta, sd = self.split(theta)
        n, J, P = self.z.shape
        v = (self.z.reshape(n * J, P) @ base_theta).reshape(n, J)
        # v_nrj = v_nj + sum_k x_njk sd_k xi_nrk
        v = v[:, None, :] + np.einsum("njk,nrk->nrj", self.xr * sd, self.draws)
        shifted = v - _lastaxis_max(v)
        e = np.exp(shifted)
        p = e / _lastaxis_sum(e)
        log_pc = shifted[self.rows, :, self.data.chosen] - np.log(_lastaxis_sum(e)[..., 0][self.rows, :])
        return p, log_pc

    def value(self, theta) -> float:
        _, log_pc = self._draw_probabilities(theta)
        R = log_pc.shape[1]
        return float((logsumexp(log_pc, axis=1) - np.log(R)).sum())

    def value_and_gradient(self, theta):
        p, log_pc = self._draw_probabilities(theta)
        R = log_pc.shape[1]
        log_s = logsumexp(log_pc, axis=1)
        # weight of each draw in the simulated probability, sums to 1 per obs
        w = np.exp(log_pc - log_s[:, None])
        q = np.einsum("nr,nrj->nj", w, p)
        resid = -q
        resid[self.rows, self.data.chosen] += 1.0
        g_base = np.einsum("nj,njk->k", resid, self.z)
        # sd part: sum_r w_nr xi_nrk (x_n,chosen,k - sum_j p_nrj x_njk)
        x_ch = self.xr[self.rows, self.data.chosen, :]
        x_bar = np.einsum("nrj,njk->nrk", p, self.xr)
        g_sd = np.einsum("nr,nrk,nrk->k", w, self.draws, x_ch[:, None, :] - x_bar)
        return float((log_s - np.log(R)).sum()), np.concatenate([g_base, g_sd])


def simulated_log_likelihood(params: ParameterVector, stddev, data: ChoiceDataset,
                             random_coefficients=("price",), n_draws=200, seed=0) -> float:
    """Simulated log-likelihood at given means and stddevs (aligned to ``random_coefficients``).

    With every stddev at zero the mixture is degenerate and the plain MNL
    log-likelihood is returned without drawing.
    """
    stddev = np.asarray(stddev, dtype=float).reshape(-1)
    if not np.any(stddev):
        return log_likelihood(params.with_constants(data.n_alternatives), data)
    idx = [data.schema.index(r) for r in random_coefficients]
    draws = halton_normal_draws(len(data), n_draws, len(idx), seed)
    sim = SimulatedLikelihood(data, idx, draws)
    theta = np.concatenate([pack(params.with_constants(data.n_alternatives), data.n_alternatives),
                            stddev])
    return sim.value(theta)


def fit_mixed_logit(data: ChoiceDataset, random_coefficients=("price",), n_draws: int = 200,
                    config: MixedLogitConfig | None = None, start: ParameterVector | None = None) -> MixedLogitResult:
    """Maximise the simulated log-likelihood.

    Starts from the MNL estimate with each stddev at a quarter of the
    corresponding mean's magnitude.  Reported stddevs are absolute values
    (the likelihood is symmetric in their sign).
    """
    config = config or MixedLogitConfig()
    if int(n_draws) != n_draws or n_draws < 1:
        raise InputError("n_draws must be a positive integer")
    n_draws = int(n_draws)
    random_coefficients = tuple(data.schema.names[data.schema.index(r)] for r in random_coefficients)
    if len(set(random_coefficients)) != len(random_coefficients):
        raise InputError("random coefficients listed twice")
    check_identification(data, config.fit_constants)
    idx = [data.schema.index(r) for r in random_coefficients]
    mnl_cfg = MnlConfig(max_iterations=config.max_iterations, gtol=config.gtol,
                        beta_cap=config.beta_cap, fit_constants=config.fit_constants)
    if start is None:
        start, _ = maximize_mnl(data, mnl_cfg)
    start = start.with_constants(data.n_alternatives)
    draws = halton_normal_draws(len(data), n_draws, len(idx), config.seed)
    sim = SimulatedLikelihood(data, idx, draws)
    width = sim.width
    k = len(data.schema)
    free = np.ones(width + len(idx), dtype=bool)
    if not config.fit_constants:
        free[k:width] = False
    if config.fix_stddev_at_zero:
        free[width:] = False
        sd0 = np.zeros(len(idx))
    else:
        sd0 = 0.25 * np.abs(start.betas[idx]) + 1e-3
    template = np.concatenate([pack(start, data.n_alternatives), sd0])

    def fg(x):
        theta = template.copy()
        theta[free] = x
        f, g = sim.value_and_gradient(theta)
        return f, g[free]

    def guard(x, _f):
        theta = template.copy()
        theta[free] = x
        big = np.abs(np.concatenate([theta[:k], theta[width:]]))
        if big.size and big.max() > config.beta_cap:
            raise SeparationError(f"a coefficient exceeded {config.beta_cap}: data appear separated")

    col_scale = _column_scale(data, np.arange(width))
    scale = np.concatenate([col_scale, col_scale[idx]])[free]
    res = bfgs_maximize(fg, template[free], gtol=config.gtol, max_iter=config.max_iterations,
                        scale=scale, check=guard)
    theta = template.copy()
    theta[free] = res.x
    theta[width:] = np.abs(theta[width:])
    params = unpack(theta[:width], data.schema)
    stddev = np.zeros(k)
    stddev[idx] = theta[width:]
    try:
        H = numeric_hessian(lambda t: sim.value_and_gradient(t)[1], theta)
        se = np.sqrt(np.diag(covariance_from_hessian(H[np.ix_(free, free)])))
    except SingularHessianError:
        se = np.full(int(free.sum()), np.nan)
    if config.fix_stddev_at_zero:
        se = np.concatenate([se, np.full(len(idx), np.nan)])
    return MixedLogitResult(params, stddev, random_coefficients, n_draws, res.value, se,
                            res.iterations, res.converged, res.gradient_norm, len(data),
                            config.fit_constants)
