"""Maximum-likelihood estimation of the multinomial logit model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import (
    ChoiceDataset,
    ParameterVector,
    design_tensor,
    log_likelihood,
    log_likelihood_gradient,
    log_likelihood_hessian,
    pack,
    unpack,
)
from ..errors import IdentificationError, InputError, SeparationError, SingularHessianError
from .optimizer import bfgs_maximize

Z_95 = 1.959963984540054


@dataclass(frozen=True)
class MnlConfig:
    max_iterations: int = 500
    gtol: float = 1e-6
    beta_cap: float = 50.0
    fit_constants: bool = True


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Fitted MNL parameters with inference and convergence diagnostics.

    ``standard_errors`` is aligned with :attr:`names`: one entry per beta,
    followed by one per estimated alternative constant.
    """

    params: ParameterVector
    log_likelihood_at_optimum: float
    standard_errors: np.ndarray
    iterations: int
    converged: bool
    gradient_norm: float
    n_observations: int
    fit_constants: bool = True
    model: str = "mnl"

    @property
    def names(self) -> list[str]:
        names = list(self.params.schema.names)
        if self.fit_constants:
            names += [f"asc_{j}" for j in range(1, self.params.n_alternatives)]
        return names

    @property
    def estimates(self) -> np.ndarray:
        theta = pack(self.params, self.params.n_alternatives)
        return theta if self.fit_constants else theta[: len(self.params.schema)]

    def confidence_interval(self, z: float = Z_95) -> tuple[np.ndarray, np.ndarray]:
        est = self.estimates
        return est - z * self.standard_errors, est + z * self.standard_errors

    def summary(self) -> str:
        lines = [f"model: {self.model}",
                 f"observations: {self.n_observations}",
                 f"log-likelihood: {self.log_likelihood_at_optimum!r}",
                 f"converged: {self.converged} after {self.iterations} iterations",
                 f"{'parameter':<14}{'estimate':>16}{'std.err':>16}"]
        for name, est, se in zip(self.names, self.estimates, self.standard_errors):
            lines.append(f"{name:<14}{est:>16.6g}{se:>16.6g}")
        return "\n".join(lines)


def check_identification(data: ChoiceDataset, fit_constants: bool = True) -> None:
    """Raise :class:`IdentificationError` naming the first uninformative attribute.

    An attribute is uninformative when it never varies across the effective
    alternatives of an observation, or (with an outside option) when it takes
    a single value across every offered alternative, which makes its effect
    indistinguishable from the baseline propensity to buy.
    """
    schema = data.schema
    X = data.attributes
    for k, name in enumerate(schema.names):
        col = X[:, :, k]
        spread = np.ptp(col, axis=1)
        if data.outside_option:
            spread = np.maximum(spread, np.max(np.abs(col), axis=1))
        if not np.any(spread > 0):
            raise IdentificationError(f"attribute '{name}' has no variation across alternatives", name)
        if data.outside_option and np.ptp(col) == 0:
            raise IdentificationError(f"attribute '{name}' is constant across all offered alternatives", name)
    z = design_tensor(data)
    if not fit_constants:
        z = z[:, :, : len(schema)]
    base = z[:, :1, :]
    diffs = (z[:, 1:, :] - base).reshape(-1, z.shape[2])
    if diffs.shape[0] > 20000:
        diffs = diffs[:: diffs.shape[0] // 20000 + 1]
    norms = np.linalg.norm(diffs, axis=0)
    norms[norms == 0] = 1.0
    diffs = diffs / norms
    names = list(schema.names) + [f"asc_{j}" for j in range(1, data.n_alternatives)]
    rank = 0
    for k in range(diffs.shape[1]):
        r = np.linalg.matrix_rank(diffs[:, : k + 1], tol=1e-9 * np.sqrt(diffs.shape[0]))
        if r == rank:
            raise IdentificationError(
                f"'{names[k]}' is a linear combination of earlier regressors", names[k]
            )
        rank = r


def _free_index(data: ChoiceDataset, fit_constants: bool) -> np.ndarray:
    k = len(data.schema)
    n_total = k + data.n_alternatives - 1
    return np.arange(n_total if fit_constants else k)


def _column_scale(data: ChoiceDataset, free: np.ndarray) -> np.ndarray:
    z = design_tensor(data)
    s = z.reshape(-1, z.shape[2]).std(axis=0)[free]
    s[s == 0] = 1.0
    return 1.0 / s


def _objective(data: ChoiceDataset, template: np.ndarray, free: np.ndarray, weights):
    schema = data.schema

    def fg(x):
        theta = template.copy()
        theta[free] = x
        params = unpack(theta, schema)
        return (log_likelihood(params, data, weights),
                log_likelihood_gradient(params, data, weights)[free])

    return fg


def maximize_mnl(data: ChoiceDataset, config: MnlConfig, start: ParameterVector | None = None,
                 weights=None, strict=False):
    """Run the ascent only; returns ``(params, AscentResult)``."""
    free = _free_index(data, config.fit_constants)
    if start is None:
        template = np.zeros(len(data.schema) + data.n_alternatives - 1)
    else:
        template = pack(start.with_constants(data.n_alternatives), data.n_alternatives)
    k = len(data.schema)

    def guard(x, _f):
        betas = x[:k]
        if np.max(np.abs(betas)) > config.beta_cap:
            worst = int(np.argmax(np.abs(betas)))
            raise SeparationError(
                f"coefficient of '{data.schema.names[worst]}' exceeded {config.beta_cap}: "
                "the data appear perfectly separated",
                data.schema.names[worst],
            )

    res = bfgs_maximize(_objective(data, template, free, weights), template[free],
                        gtol=config.gtol, max_iter=config.max_iterations,
                        scale=_column_scale(data, free), check=guard, strict=strict)
    theta = template.copy()
    theta[free] = res.x
    return unpack(theta, data.schema), res


def fit_mnl(data: ChoiceDataset, config: MnlConfig | None = None, start=None,
            weights=None, check=True) -> EstimationResult:
    """Fit an MNL by BFGS from ``start`` (zeros by default).

    ``weights`` multiplies each observation's log-likelihood contribution.
    Raises :class:`IdentificationError` for uninformative attributes and
    :class:`SeparationError` when a coefficient passes ``config.beta_cap``;
    running out of iterations is reported through ``converged=False``.
    """
    config = config or MnlConfig()
    if len(data) == 0:
        raise InputError("cannot fit an empty dataset")
    if check:
        check_identification(data, config.fit_constants)
    params, res = maximize_mnl(data, config, start, weights)
    try:
        se = standard_errors(params, data, weights=weights, fit_constants=config.fit_constants)
    except SingularHessianError:
        se = np.full(_free_index(data, config.fit_constants).size, np.nan)
    return EstimationResult(params, res.value, se, res.iterations, res.converged,
                            res.gradient_norm, len(data), config.fit_constants)


def numeric_hessian(gradient, theta, step=1e-5) -> np.ndarray:
    """Central differences of an analytic gradient, symmetrised."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        H[:, i] = (gradient(theta + e) - gradient(theta - e)) / (2 * step)
    return 0.5 * (H + H.T)


def covariance_from_hessian(H) -> np.ndarray:
    info = -np.asarray(H)
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularHessianError("Hessian is not negative definite") from None
    if np.linalg.cond(info) > 1e14:
        raise SingularHessianError("Hessian is numerically singular")
    inv_chol = np.linalg.inv(chol)
    return inv_chol.T @ inv_chol


def standard_errors(params: ParameterVector, data: ChoiceDataset, method="analytic",
                    step=1e-5, weights=None, fit_constants=True) -> np.ndarray:
    """Square roots of the diagonal of the inverse negative Hessian.

    ``method`` is ``"analytic"`` or ``"numeric"`` (central differences of the
    analytic gradient).  The ordering matches :func:`~choiceforge.core.pack`.
    """
    params = params.with_constants(data.n_alternatives)
    free = _free_index(data, fit_constants)
    if method == "analytic":
        H = log_likelihood_hessian(params, data, weights)
    elif method == "numeric":
        def grad(theta):
            return log_likelihood_gradient(unpack(theta, data.schema), data, weights)
        H = numeric_hessian(grad, pack(params, data.n_alternatives), step)
    else:
        raise InputError(f"unknown Hessian method '{method}'")
    H = H[np.ix_(free, free)]
    return np.sqrt(np.diag(covariance_from_hessian(H)))
