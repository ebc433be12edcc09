"""Random-utility building blocks.

Alternatives are described by attribute vectors over a shared schema, the
systematic utility is linear in the attributes plus an alternative-specific
constant, and choice probabilities follow the multinomial logit form.  An
optional outside (no-purchase) alternative carries utility exactly zero and is
always the last effective alternative.

Datasets are stored as dense arrays of shape ``(n_obs, n_alternatives,
n_attributes)``; the per-observation objects are materialised on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, SchemaError

PRICE = "price"


def make_rng(seed=None) -> np.random.Generator:
    """Counter-based (Philox) generator; passes existing generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute names with exactly one price position."""

    names: tuple
    price: str = PRICE

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"duplicate attribute names in {self.names}")
        if self.names.count(self.price) != 1:
            raise SchemaError(f"schema must contain exactly one '{self.price}' attribute")

    def __len__(self):
        return len(self.names)

    @property
    def price_index(self) -> int:
        return self.names.index(self.price)

    @property
    def non_price_indices(self) -> list[int]:
        return [k for k in range(len(self.names)) if k != self.price_index]

    def index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            k = int(name_or_index)
            if not 0 <= k < len(self.names):
                raise SchemaError(f"attribute index {k} out of range")
            return k
        try:
            return self.names.index(name_or_index)
        except ValueError:
            raise SchemaError(f"unknown attribute '{name_or_index}'") from None


def _as_vector(values, name) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class AttributeVector:
    values: np.ndarray
    schema: AttributeSchema

    def __post_init__(self):
        values = _as_vector(self.values, "attribute values")
        if values.size != len(self.schema):
            raise SchemaError(
                f"attribute vector has {values.size} values, schema has {len(self.schema)}"
            )
        if values[self.schema.price_index] < 0:
            raise SchemaError("price must be non-negative")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def price(self) -> float:
        return float(self.values[self.schema.price_index])

    def with_price(self, price: float) -> AttributeVector:
        values = self.values.copy()
        values[self.schema.price_index] = price
        return AttributeVector(values, self.schema)


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Utility weights aligned to a schema plus per-alternative constants.

    The first constant is the identification normalisation and must be 0.
    """

    betas: np.ndarray
    schema: AttributeSchema
    alternative_constants: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        betas = _as_vector(self.betas, "betas")
        if betas.size != len(self.schema):
            raise SchemaError(f"{betas.size} betas for a schema of {len(self.schema)} attributes")
        constants = _as_vector(self.alternative_constants, "alternative constants")
        if constants.size < 1:
            constants = np.zeros(1)
        if constants[0] != 0.0:
            raise SchemaError("first alternative constant is fixed at 0")
        betas.flags.writeable = False
        constants.flags.writeable = False
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alternative_constants", constants)

    @property
    def price_coefficient(self) -> float:
        return float(self.betas[self.schema.price_index])

    @property
    def n_alternatives(self) -> int:
        return self.alternative_constants.size

    def beta(self, name) -> float:
        return float(self.betas[self.schema.index(name)])

    def constant(self, alt_index: int) -> float:
        if alt_index < self.alternative_constants.size:
            return float(self.alternative_constants[alt_index])
        raise SchemaError(f"no constant for alternative {alt_index}")

    def scaled(self, factor: float) -> ParameterVector:
        return ParameterVector(self.betas * factor, self.schema, self.alternative_constants * factor)

    def with_constants(self, n_alternatives: int) -> ParameterVector:
        """Pad (with zeros) or truncate constants to ``n_alternatives`` entries."""
        constants = np.zeros(max(n_alternatives, 1))
        m = min(constants.size, self.alternative_constants.size)
        constants[:m] = self.alternative_constants[:m]
        return ParameterVector(self.betas, self.schema, constants)

    def as_dict(self) -> dict:
        return {name: float(b) for name, b in zip(self.schema.names, self.betas)}


@dataclass(frozen=True, eq=False)
class ChoiceScenario:
    alternatives: tuple
    includes_outside_option: bool = False

    def __post_init__(self):
        alts = tuple(self.alternatives)
        if not alts:
            raise InputError("a scenario needs at least one alternative")
        schema = alts[0].schema
        if any(a.schema != schema for a in alts):
            raise SchemaError("all alternatives in a scenario must share one schema")
        if len(alts) + int(self.includes_outside_option) < 2:
            raise InputError("a scenario needs at least two effective alternatives")
        object.__setattr__(self, "alternatives", alts)

    @property
    def schema(self) -> AttributeSchema:
        return self.alternatives[0].schema

    @property
    def n_effective(self) -> int:
        return len(self.alternatives) + int(self.includes_outside_option)

    @property
    def outside_index(self):
        return len(self.alternatives) if self.includes_outside_option else None

    def matrix(self) -> np.ndarray:
        return np.stack([a.values for a in self.alternatives])


@dataclass(frozen=True, eq=False)
class ChoiceObservation:
    scenario: ChoiceScenario
    chosen_index: int

    def __post_init__(self):
        if not 0 <= self.chosen_index < self.scenario.n_effective:
            raise InputError(
                f"chosen index {self.chosen_index} outside 0..{self.scenario.n_effective - 1}"
            )


class ChoiceDataset:
    """Choice observations in dense array form.

    Parameters
    ----------
    schema : AttributeSchema
    attributes : array, shape (n_obs, n_alternatives, n_attributes)
        Attributes of the inside alternatives; the outside option is implicit.
    chosen : int array, shape (n_obs,)
        Index into the effective alternatives (outside option last).
    outside_option : bool
    constructs : array, shape (n_obs, n_alternatives, n_constructs), optional
        Observed latent-construct scores per inside alternative.
    construct_names : sequence of str
    """

    def __init__(self, schema, attributes, chosen, outside_option=False,
                 constructs=None, construct_names=()):
        X = np.array(attributes, dtype=float)
        y = np.array(chosen)
        if X.ndim != 3 or X.shape[0] == 0:
            raise InputError("a dataset needs at least one observation")
        if X.shape[2] != len(schema):
            raise SchemaError(f"attributes have {X.shape[2]} columns, schema has {len(schema)}")
        if not np.all(np.isfinite(X)):
            raise SchemaError("attribute values must be finite")
        if np.any(X[:, :, schema.price_index] < 0):
            raise SchemaError("prices must be non-negative")
        if y.shape != (X.shape[0],) or not np.issubdtype(y.dtype, np.integer):
            raise InputError("chosen must be one integer index per observation")
        n_eff = X.shape[1] + int(outside_option)
        if n_eff < 2:
            raise InputError("observations need at least two effective alternatives")
        if np.any((y < 0) | (y >= n_eff)):
            raise InputError("chosen index out of range")
        if constructs is not None:
            constructs = np.array(constructs, dtype=float)
            if constructs.shape[:2] != X.shape[:2] or constructs.shape[2] != len(construct_names):
                raise SchemaError("construct scores do not match the attribute layout")
            constructs.flags.writeable = False
        X.flags.writeable = False
        y = y.astype(np.int64)
        y.flags.writeable = False
        self.schema = schema
        self.attributes = X
        self.chosen = y
        self.outside_option = bool(outside_option)
        self.constructs = constructs
        self.construct_names = tuple(construct_names)
        self._design = None

    @classmethod
    def from_observations(cls, observations: Iterable[ChoiceObservation]) -> ChoiceDataset:
        observations = list(observations)
        if not observations:
            raise InputError("a dataset needs at least one observation")
        first = observations[0].scenario
        shape = (len(first.alternatives), first.includes_outside_option)
        for obs in observations:
            sc = obs.scenario
            if sc.schema != first.schema:
                raise SchemaError("observations use different schemas")
            if (len(sc.alternatives), sc.includes_outside_option) != shape:
                raise InputError("observations must share the number of alternatives")
        X = np.stack([o.scenario.matrix() for o in observations])
        y = np.array([o.chosen_index for o in observations], dtype=np.int64)
        return cls(first.schema, X, y, first.includes_outside_option)

    def __len__(self):
        return self.attributes.shape[0]

    @property
    def n_alternatives(self) -> int:
        return self.attributes.shape[1]

    @property
    def n_effective(self) -> int:
        return self.n_alternatives + int(self.outside_option)

    def scenario(self, i: int) -> ChoiceScenario:
        alts = tuple(AttributeVector(row, self.schema) for row in self.attributes[i])
        return ChoiceScenario(alts, self.outside_option)

    @property
    def observations(self) -> list[ChoiceObservation]:
        return [ChoiceObservation(self.scenario(i), int(self.chosen[i])) for i in range(len(self))]

    def take(self, index) -> ChoiceDataset:
        index = np.asarray(index)
        constructs = None if self.constructs is None else self.constructs[index]
        return ChoiceDataset(self.schema, self.attributes[index], self.chosen[index],
                             self.outside_option, constructs, self.construct_names)


def _check_alignment(params: ParameterVector, schema: AttributeSchema):
    if params.schema != schema:
        raise SchemaError(
            f"parameters are for {params.schema.names}, data use {schema.names}"
        )


def systematic_utility(params: ParameterVector, alt: AttributeVector, alt_index: int = 0) -> float:
    _check_alignment(params, alt.schema)
    return params.constant(alt_index) + float(np.dot(params.betas, alt.values))


def _lastaxis_max(v: np.ndarray) -> np.ndarray:
    # column loop: much faster than a reduce over a short last axis
    m = v[..., 0].copy()
    for j in range(1, v.shape[-1]):
        np.maximum(m, v[..., j], out=m)
    return m[..., None]


def _lastaxis_sum(v: np.ndarray) -> np.ndarray:
    # fixed left-to-right order keeps results bit-reproducible
    s = v[..., 0].copy()
    for j in range(1, v.shape[-1]):
        s += v[..., j]
    return s[..., None]


def logit_probabilities(utilities) -> np.ndarray:
    """Softmax over the last axis with a max shift, so huge utilities stay finite."""
    v = np.asarray(utilities, dtype=float)
    e = np.exp(v - _lastaxis_max(v))
    return e / _lastaxis_sum(e)


def log_logit_probabilities(utilities) -> np.ndarray:
    v = np.asarray(utilities, dtype=float)
    shifted = v - _lastaxis_max(v)
    return shifted - np.log(_lastaxis_sum(np.exp(shifted)))


def _constants_for(params: ParameterVector, n_alternatives: int) -> np.ndarray:
    c = params.alternative_constants
    if c.size == n_alternatives:
        return c
    if c.size == 1 and not c[0]:
        return np.zeros(n_alternatives)
    raise SchemaError(f"{c.size} alternative constants for {n_alternatives} alternatives")


def scenario_utilities(params: ParameterVector, scenario: ChoiceScenario) -> np.ndarray:
    _check_alignment(params, scenario.schema)
    v = scenario.matrix() @ params.betas + _constants_for(params, len(scenario.alternatives))
    if scenario.includes_outside_option:
        v = np.append(v, 0.0)
    return v


def choice_probabilities(params: ParameterVector, scenario: ChoiceScenario) -> np.ndarray:
    return logit_probabilities(scenario_utilities(params, scenario))


def utility_matrix(params: ParameterVector, data: ChoiceDataset) -> np.ndarray:
    """Systematic utilities of every effective alternative, shape (n_obs, n_effective)."""
    _check_alignment(params, data.schema)
    n, j, k = data.attributes.shape
    v = (data.attributes.reshape(n * j, k) @ params.betas).reshape(n, j)
    v += _constants_for(params, j)
    if data.outside_option:
        v = np.concatenate([v, np.zeros((len(data), 1))], axis=1)
    return v


def chosen_log_probabilities(params: ParameterVector, data: ChoiceDataset) -> np.ndarray:
    logp = log_logit_probabilities(utility_matrix(params, data))
    return logp[np.arange(len(data)), data.chosen]


def log_likelihood(params: ParameterVector, data: ChoiceDataset, weights=None) -> float:
    if len(data) == 0:
        raise InputError("log-likelihood of an empty dataset")
    ll = chosen_log_probabilities(params, data)
    if weights is not None:
        ll = ll * weights
    return float(ll.sum())


def design_tensor(data: ChoiceDataset) -> np.ndarray:
    """Regressors for every free parameter: attributes, then constant dummies.

    Shape (n_obs, n_effective, n_attributes + n_alternatives - 1); the outside
    option row is all zeros.  Cached on the dataset.
    """
    cached = getattr(data, "_design", None)
    if cached is not None:
        return cached
    n, j, k = data.attributes.shape
    z = np.zeros((n, data.n_effective, k + j - 1))
    z[:, :j, :k] = data.attributes
    for a in range(1, j):
        z[:, a, k + a - 1] = 1.0
    z.flags.writeable = False
    data._design = z
    return z


def n_free_parameters(data: ChoiceDataset) -> int:
    return len(data.schema) + data.n_alternatives - 1


def pack(params: ParameterVector, n_alternatives: int) -> np.ndarray:
    """Free parameters as a flat vector: betas then constants 1.."""
    c = _constants_for(params, n_alternatives)
    return np.concatenate([params.betas, c[1:]])


def unpack(theta, schema: AttributeSchema) -> ParameterVector:
    theta = np.asarray(theta, dtype=float)
    k = len(schema)
    return ParameterVector(theta[:k], schema, np.concatenate([[0.0], theta[k:]]))


def log_likelihood_gradient(params: ParameterVector, data: ChoiceDataset, weights=None) -> np.ndarray:
    """Analytic gradient over betas and the non-normalised constants.

    Each observation contributes ``z_chosen - sum_j P_j z_j``.
    """
    if len(data) == 0:
        raise InputError("gradient of an empty dataset")
    p = logit_probabilities(utility_matrix(params, data))
    z = design_tensor(data)
    resid = -p
    resid[np.arange(len(data)), data.chosen] += 1.0
    if weights is not None:
        resid = resid * np.asarray(weights)[:, None]
    return np.einsum("nj,njk->k", resid, z)


def log_likelihood_hessian(params: ParameterVector, data: ChoiceDataset, weights=None) -> np.ndarray:
    """Analytic Hessian: ``-sum_n sum_j P_j (z_j - zbar)(z_j - zbar)'``."""
    p = logit_probabilities(utility_matrix(params, data))
    z = design_tensor(data)
    zbar = np.einsum("nj,njk->nk", p, z)
    dz = z - zbar[:, None, :]
    w = p if weights is None else p * np.asarray(weights)[:, None]
    return -np.einsum("nj,njk,njl->kl", w, dz, dz)


def gumbel_noise(rng: np.random.Generator, size) -> np.ndarray:
    """Standard Gumbel draws by inverse CDF on the open unit interval."""
    u = rng.random(size)
    u = np.where(u > 0.0, u, np.nextafter(0.0, 1.0))
    return -np.log(-np.log(u))


def simulate_choices(utilities, rng) -> np.ndarray:
    """Argmax of utility plus Gumbel noise for each row of ``utilities``."""
    v = np.asarray(utilities, dtype=float)
    eps = gumbel_noise(make_rng(rng), v.shape)
    return np.argmax(v + eps, axis=-1)


def simulate_choice(params: ParameterVector, scenario: ChoiceScenario, rng_state) -> int:
    return int(simulate_choices(scenario_utilities(params, scenario), rng_state))


def make_scenario(schema: AttributeSchema, rows: Sequence[Sequence[float]],
                  outside_option: bool = False) -> ChoiceScenario:
    return ChoiceScenario(tuple(AttributeVector(r, schema) for r in rows), outside_option)
