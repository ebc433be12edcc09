"""Stimulus-organism-response chains of linear causal links.

Technical indicators map to construct scores (perceived authenticity,
enjoyment, ...) through affine links fitted by least squares; a terminal
parameter vector over the final constructs and price turns them into
systematic utility.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import AttributeSchema, ChoiceDataset, ParameterVector
from .errors import CollinearityError, InputError, SchemaError

RIDGE = 1e-10


@dataclass(frozen=True, eq=False)
class LinearCausalLink:
    """``outputs = weights @ inputs + intercepts`` (plus residual noise)."""

    input_names: tuple
    output_names: tuple
    weights: np.ndarray
    intercepts: np.ndarray
    residual_stddev: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))
        n_out, n_in = len(self.output_names), len(self.input_names)
        W = np.array(self.weights, dtype=float)
        c = np.array(self.intercepts, dtype=float).reshape(-1)
        s = np.array(self.residual_stddev, dtype=float).reshape(-1)
        if W.shape != (n_out, n_in) or c.size != n_out or s.size != n_out:
            raise SchemaError(f"link shapes do not match {n_out} outputs x {n_in} inputs")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise InputError("link entries must be finite")
        if np.any(s < 0):
            raise InputError("residual stddev must be non-negative")
        for a in (W, c, s):
            a.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "intercepts", c)
        object.__setattr__(self, "residual_stddev", s)

    @classmethod
    def identity(cls, names) -> LinearCausalLink:
        n = len(names)
        return cls(names, names, np.eye(n), np.zeros(n), np.zeros(n))

    def apply(self, inputs) -> np.ndarray:
        """Mean prediction; ``inputs`` may be a vector or a row-per-observation matrix."""
        x = np.asarray(inputs, dtype=float)
        if x.shape[-1] != len(self.input_names):
            raise SchemaError(f"expected {len(self.input_names)} inputs, got {x.shape[-1]}")
        return x @ self.weights.T + self.intercepts

    def then(self, other: LinearCausalLink) -> LinearCausalLink:
        """The single link equivalent to applying ``self`` and then ``other``."""
        if other.input_names != self.output_names:
            raise SchemaError(f"cannot chain {self.output_names} into {other.input_names}")
        W = other.weights @ self.weights
        c = other.weights @ self.intercepts + other.intercepts
        return LinearCausalLink(self.input_names, other.output_names, W, c,
                                np.zeros(len(other.output_names)))


def _dependent_columns(X: np.ndarray, names) -> list[str]:
    """Columns that are linear combinations of the intercept and earlier columns."""
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    basis = np.ones((X.shape[0], 1))
    dependent = []
    for k in range(X.shape[1]):
        trial = np.column_stack([basis, X[:, k] / scale[k]])
        if np.linalg.matrix_rank(trial) < trial.shape[1]:
            dependent.append(names[k])
        else:
            basis = trial
    return dependent


def fit_link(inputs, outputs, input_names=None, output_names=None, ridge: float = RIDGE) -> LinearCausalLink:
    """Least-squares affine link, one regression per output column.

    Columns are centred and scaled before the normal equations are formed,
    with ``ridge`` added to the diagonal; the intercept follows from the
    means.  Residual stddev uses ``n - p - 1`` degrees of freedom.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(outputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.shape
    if Y.shape[0] != n:
        raise InputError(f"{n} input rows but {Y.shape[0]} output rows")
    if n < p + 1:
        raise InputError(f"need at least {p + 1} rows to fit {p} inputs, got {n}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InputError("regression data must be finite")
    input_names = tuple(input_names) if input_names is not None else tuple(f"x{k}" for k in range(p))
    output_names = tuple(output_names) if output_names is not None else tuple(f"y{k}" for k in range(Y.shape[1]))
    dependent = _dependent_columns(X, input_names)
    if dependent:
        raise CollinearityError(f"inputs are collinear; dependent columns: {', '.join(dependent)}",
                                columns=dependent)
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    sx = X.std(axis=0)
    Xs = (X - mx) / sx
    A = Xs.T @ Xs + ridge * np.eye(p)
    B = np.linalg.solve(A, Xs.T @ (Y - my))
    W = (B / sx[:, None]).T
    c = my - W @ mx
    resid = Y - X @ W.T - c
    dof = max(n - p - 1, 1)
    sd = np.sqrt((resid ** 2).sum(axis=0) / dof)
    return LinearCausalLink(input_names, output_names, W, c, sd)


@dataclass(frozen=True, eq=False)
class CausalChain:
    """Links applied in order, then ``terminal_params`` over the final constructs and price."""

    links: tuple
    terminal_params: ParameterVector

    def __post_init__(self):
        links = tuple(self.links)
        if not links:
            raise InputError("a chain needs at least one link")
        for a, b in zip(links, links[1:]):
            if a.output_names != b.input_names:
                raise SchemaError(f"link outputs {a.output_names} do not feed inputs {b.input_names}")
        schema = self.terminal_params.schema
        expected = links[-1].output_names
        if tuple(schema.names[k] for k in schema.non_price_indices) != expected:
            raise SchemaError(f"terminal parameters must cover {expected} plus price")
        object.__setattr__(self, "links", links)

    @property
    def indicator_names(self) -> tuple:
        return self.links[0].input_names

    def construct_weights(self) -> np.ndarray:
        s = self.terminal_params.schema
        return self.terminal_params.betas[s.non_price_indices]


def compose(chain: CausalChain) -> LinearCausalLink:
    """Single affine map from indicators to final constructs."""
    out = chain.links[0]
    for link in chain.links[1:]:
        out = out.then(link)
    return out


def composed_utility_map(chain: CausalChain) -> tuple[np.ndarray, float]:
    """Indicator coefficients and constant of the chain's systematic utility (price excluded)."""
    link = compose(chain)
    w = chain.construct_weights()
    return w @ link.weights, float(w @ link.intercepts)


def propagate(chain: CausalChain, indicators, price: float, alt_index: int = 0) -> float:
    """Systematic utility of one offer: links applied in order, then the terminal weights."""
    z = np.asarray(indicators, dtype=float).reshape(-1)
    if z.size != len(chain.indicator_names):
        raise SchemaError(f"expected {len(chain.indicator_names)} indicators, got {z.size}")
    for link in chain.links:
        z = link.apply(z)
    tp = chain.terminal_params
    return float(tp.constant(alt_index) + chain.construct_weights() @ z + tp.price_coefficient * price)


@dataclass(frozen=True)
class EffectDecomposition:
    indicator: str
    path: tuple
    link_effects: tuple
    path_effect: float
    total_effect: float
    path_effects: dict


def enumerate_paths(chain: CausalChain) -> list[tuple]:
    """Every sequence of one output label per link."""
    return list(itertools.product(*(link.output_names for link in chain.links)))


def _path_effect(chain: CausalChain, k: int, path) -> tuple[tuple, float]:
    effects = []
    prev = k
    for link, label in zip(chain.links, path):
        j = link.output_names.index(label)
        effects.append(float(link.weights[j, prev]))
        prev = j
    effects.append(float(chain.construct_weights()[prev]))
    return tuple(effects), float(np.prod(effects))


def explain_effect(chain: CausalChain, indicator, path) -> EffectDecomposition:
    """Marginal effect of an indicator on utility along one construct path.

    ``path`` names one construct per link.  ``link_effects`` ends with the
    terminal weight of the path's last construct; ``total_effect`` is the
    composed coefficient, equal to the sum over all paths.
    """
    names = chain.indicator_names
    if isinstance(indicator, (int, np.integer)):
        if not 0 <= indicator < len(names):
            raise InputError(f"indicator index {indicator} out of range")
        k = int(indicator)
    elif indicator in names:
        k = names.index(indicator)
    else:
        raise InputError(f"unknown indicator '{indicator}'")
    path = tuple(path)
    if len(path) != len(chain.links):
        raise InputError(f"path needs one construct per link ({len(chain.links)})")
    for link, label in zip(chain.links, path):
        if label not in link.output_names:
            raise InputError(f"unknown construct '{label}'")
    effects, product = _path_effect(chain, k, path)
    coef, _ = composed_utility_map(chain)
    every = {p: _path_effect(chain, k, p)[1] for p in enumerate_paths(chain)}
    return EffectDecomposition(names[k], path, effects, product, float(coef[k]), every)


@dataclass(frozen=True, eq=False)
class ChainFit:
    chain: CausalChain
    terminal_result: object


def construct_dataset(data: ChoiceDataset) -> ChoiceDataset:
    """Choice data with the construct scores (plus price) as attributes."""
    if data.constructs is None or not data.construct_names:
        raise InputError("dataset has no construct columns")
    p = data.schema.price_index
    schema = AttributeSchema(tuple(data.construct_names) + (data.schema.price,), price=data.schema.price)
    attrs = np.concatenate([data.constructs, data.attributes[:, :, [p]]], axis=2)
    return ChoiceDataset(schema, attrs, data.chosen, data.outside_option)


def fit_chain(data: ChoiceDataset, estimator=None) -> ChainFit:
    """Fit indicators -> constructs on every offered alternative, then the terminal logit.

    ``estimator`` maps a dataset to a result with ``params`` (default
    :func:`fit_mnl`).
    """
    if estimator is None:
        from .estimation.mnl import fit_mnl as estimator
    terminal_data = construct_dataset(data)
    idx = data.schema.non_price_indices
    X = data.attributes[:, :, idx].reshape(-1, len(idx))
    Z = data.constructs.reshape(-1, len(data.construct_names))
    link = fit_link(X, Z, [data.schema.names[k] for k in idx], data.construct_names)
    result = estimator(terminal_data)
    return ChainFit(CausalChain((link,), result.params), result)
