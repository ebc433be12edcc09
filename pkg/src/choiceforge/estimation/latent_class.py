"""Latent-class logit by expectation-maximisation.

Each consumer belongs to one of ``K`` classes with its own MNL parameters;
class membership is unobserved and the shares form a discrete mixing
distribution.  Observations sharing a ``group`` id are treated as choices of
the same consumer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..core import ChoiceDataset, ParameterVector, chosen_log_probabilities, log_likelihood_gradient, make_rng, pack, unpack
from ..errors import InputError, SingularHessianError
from .optimizer import bfgs_maximize
from .mnl import MnlConfig, _column_scale, check_identification, covariance_from_hessian, maximize_mnl, numeric_hessian


@dataclass(frozen=True)
class LatentClassConfig:
    max_iterations: int = 2000
    tol: float = 1e-8
    gtol: float = 1e-6
    em_iterations: int = 50
    switch_tol: float = 1e-2
    n_starts: int = 5
    seed: int = 0
    perturbation: float = 0.1
    m_step_iterations: int = 20
    fit_constants: bool = True
    degenerate_share: float = 1e-6


@dataclass(frozen=True, eq=False)
class LatentClassResult:
    """Classes are ordered by descending price coefficient."""

    class_params: tuple
    class_shares: np.ndarray
    log_likelihood_trace: tuple
    iterations: int
    converged: bool
    n_observations: int
    standard_errors: tuple = ()
    warnings: tuple = ()
    start_index: int = 0
    fit_constants: bool = True

    @property
    def n_classes(self) -> int:
        return len(self.class_params)

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]

    def summary(self) -> str:
        lines = ["model: lcm",
                 f"classes: {self.n_classes}",
                 f"observations: {self.n_observations}",
                 f"log-likelihood: {self.log_likelihood!r}",
                 f"converged: {self.converged} after {self.iterations} EM iterations"]
        for c, (p, share) in enumerate(zip(self.class_params, self.class_shares)):
            lines.append(f"class {c}: share {share:.6g}")
            se = self.standard_errors[c] if self.standard_errors else np.full(len(p.betas), np.nan)
            for name, b, s in zip(p.schema.names, p.betas, se):
                lines.append(f"  {name:<12}{b:>16.6g}{s:>16.6g}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def _group_index(data: ChoiceDataset, groups):
    if groups is None:
        return np.arange(len(data)), len(data)
    groups = np.asarray(groups)
    if groups.shape != (len(data),):
        raise InputError("one group id per observation is required")
    _, inverse = np.unique(groups, return_inverse=True)
    return inverse, int(inverse.max()) + 1


def _class_loglik(class_params, data, gidx, n_groups):
    """Per-group log-likelihood under each class, shape (n_groups, K)."""
    cols = []
    for p in class_params:
        lp = chosen_log_probabilities(p, data)
        cols.append(lp if n_groups == len(data) and np.all(gidx == np.arange(len(data)))
                    else np.bincount(gidx, weights=lp, minlength=n_groups))
    return np.stack(cols, axis=1)


def mixture_log_likelihood(class_params, shares, data: ChoiceDataset, groups=None) -> float:
    gidx, n_groups = _group_index(data, groups)
    G = _class_loglik(class_params, data, gidx, n_groups)
    return float(logsumexp(G + np.log(shares), axis=1).sum())


def _run_em(data, starts, shares, config, gidx, n_groups):
    """EM ascent followed by a strict quasi-Newton polish of the same likelihood.

    Returns ``(params, shares, trace, iterations, converged)``; ``trace``
    holds the observed-data log-likelihood after every accepted update.
    """
    mnl_cfg = MnlConfig(max_iterations=config.m_step_iterations, fit_constants=config.fit_constants)
    params = list(starts)
    log_shares = np.log(shares)
    G = _class_loglik(params, data, gidx, n_groups)
    joint = G + log_shares
    trace = [float(logsumexp(joint, axis=1).sum())]
    converged = False
    it = 0
    while it < min(config.max_iterations, config.em_iterations):
        it += 1
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        new_shares = resp.mean(axis=0)
        for c in range(len(params)):
            w = resp[gidx, c]
            if w.sum() <= 0:
                continue
            params[c], _ = maximize_mnl(data, mnl_cfg, params[c], weights=w, strict=True)
        with np.errstate(divide="ignore"):
            log_shares = np.log(new_shares)
        G = _class_loglik(params, data, gidx, n_groups)
        joint = G + log_shares
        trace.append(float(logsumexp(joint, axis=1).sum()))
        gain = trace[-1] - trace[-2]
        if gain < config.tol:
            return params, np.exp(log_shares), trace, it, True
        if gain < config.switch_tol:
            break
    if it >= config.max_iterations or np.any(~np.isfinite(log_shares)):
        return params, np.exp(log_shares), trace, it, converged
    n_alt = data.n_alternatives
    K = len(params)
    width = len(data.schema) + n_alt - 1
    free = np.ones(K * width + K - 1, dtype=bool)
    if not config.fit_constants:
        for c in range(K):
            free[c * width + len(data.schema):(c + 1) * width] = False
    theta0 = np.concatenate([pack(p.with_constants(n_alt), n_alt) for p in params]
                            + [log_shares[1:] - log_shares[0]])

    def fg(x):
        theta = theta0.copy()
        theta[free] = x
        return _mixture_value_and_gradient(theta, data.schema, K, n_alt, data, gidx, n_groups)

    def record(_x, f):
        trace.append(float(f))

    scale = np.concatenate([_column_scale(data, np.arange(width))] * K + [np.ones(K - 1)])[free]
    res = bfgs_maximize(fg, theta0[free], gtol=config.gtol, scale=scale,
                        max_iter=config.max_iterations - it, check=record, strict=True,
                        ftol=config.tol)
    theta = theta0.copy()
    theta[free] = res.x
    params, shares = _unpack_mixture(theta, data.schema, K, n_alt)
    return params, shares, trace, it + res.iterations, res.converged


def _mixture_value_and_gradient(theta, schema, n_classes, n_alt, data, gidx, n_groups):
    params, shares = _unpack_mixture(theta, schema, n_classes, n_alt)
    G = _class_loglik(params, data, gidx, n_groups)
    joint = G + np.log(shares)
    norm = logsumexp(joint, axis=1, keepdims=True)
    resp = np.exp(joint - norm)
    parts = [log_likelihood_gradient(p, data, weights=resp[gidx, c]) for c, p in enumerate(params)]
    parts.append((resp - shares).sum(axis=0)[1:])
    return float(norm.sum()), np.concatenate(parts)


def _mixture_gradient(theta, schema, n_classes, n_alt, data, gidx, n_groups):
    """Gradient of the mixture log-likelihood in (class params, share logits)."""
    return _mixture_value_and_gradient(theta, schema, n_classes, n_alt, data, gidx, n_groups)[1]


def _unpack_mixture(theta, schema, n_classes, n_alt):
    width = len(schema) + n_alt - 1
    params = [unpack(theta[c * width:(c + 1) * width], schema) for c in range(n_classes)]
    logits = np.concatenate([[0.0], theta[n_classes * width:]])
    shares = np.exp(logits - logsumexp(logits))
    return params, shares


def _mixture_standard_errors(params, shares, data, gidx, n_groups, fit_constants):
    n_alt = data.n_alternatives
    K = len(params)
    width = len(data.schema) + n_alt - 1
    theta = np.concatenate([pack(p.with_constants(n_alt), n_alt) for p in params]
                           + [np.log(shares[1:]) - np.log(shares[0])])
    H = numeric_hessian(lambda t: _mixture_gradient(t, data.schema, K, n_alt, data, gidx, n_groups), theta)
    keep = np.ones(theta.size, dtype=bool)
    if not fit_constants:
        for c in range(K):
            keep[c * width + len(data.schema):(c + 1) * width] = False
    se = np.full(theta.size, np.nan)
    se[keep] = np.sqrt(np.diag(covariance_from_hessian(H[np.ix_(keep, keep)])))
    return tuple(se[c * width:(c + 1) * width][: width if fit_constants else len(data.schema)]
                 for c in range(K))


def fit_latent_class(data: ChoiceDataset, n_classes: int, config: LatentClassConfig | None = None,
                     groups=None) -> LatentClassResult:
    """Estimate a ``n_classes`` latent-class logit with multi-start EM.

    Starts are the pooled MNL estimate with each class coefficient scaled by
    an independent uniform factor in ``1 +/- perturbation``; the run with the
    highest final log-likelihood wins (earliest start on ties).
    """
    config = config or LatentClassConfig()
    if int(n_classes) != n_classes or n_classes < 1:
        raise InputError("n_classes must be a positive integer")
    n_classes = int(n_classes)
    if config.n_starts < 1:
        raise InputError("at least one start is required")
    check_identification(data, config.fit_constants)
    gidx, n_groups = _group_index(data, groups)
    base, _ = maximize_mnl(data, MnlConfig(fit_constants=config.fit_constants))
    rng = make_rng(config.seed)
    n_starts = 1 if n_classes == 1 else config.n_starts
    best = None
    for s in range(n_starts):
        if n_classes == 1:
            starts = [base]
        else:
            starts = []
            for _ in range(n_classes):
                f = 1.0 + config.perturbation * rng.uniform(-1.0, 1.0, size=len(base.betas))
                starts.append(ParameterVector(base.betas * f, base.schema, base.alternative_constants))
        shares = np.full(n_classes, 1.0 / n_classes)
        run = _run_em(data, starts, shares, config, gidx, n_groups)
        if best is None or run[2][-1] > best[0][2][-1]:
            best = (run, s)
    (params, shares, trace, iterations, converged), start_index = best
    order = sorted(range(n_classes), key=lambda c: -params[c].price_coefficient)
    params = [params[c] for c in order]
    shares = shares[order]
    shares = shares / shares.sum()
    warnings = tuple(f"class {c} is degenerate (share {shares[c]:.3g})"
                     for c in range(n_classes) if shares[c] < config.degenerate_share)
    try:
        se = _mixture_standard_errors(params, np.maximum(shares, 1e-300), data, gidx, n_groups,
                                      config.fit_constants)
    except SingularHessianError:
        width = len(data.schema) + (data.n_alternatives - 1 if config.fit_constants else 0)
        se = tuple(np.full(width, np.nan) for _ in range(n_classes))
        warnings += ("information matrix is singular; standard errors unavailable",)
    return LatentClassResult(tuple(params), shares, tuple(trace), iterations, converged, len(data),
                             se, warnings, start_index, config.fit_constants)
