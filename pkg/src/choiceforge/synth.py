"""Synthetic choice markets with known ground truth.

Designs are balanced level grids; choices are drawn from the random-utility
model with Gumbel noise.  All randomness flows from a Philox generator keyed
by the spec seed, split per purpose and per block of scenarios, so the output
is byte-identical across runs and independent of how blocks are scheduled.

The default virtual-traveling parameters below are illustrative values
chosen for this toolkit, not empirical estimates.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AttributeSchema,
    ChoiceDataset,
    ChoiceScenario,
    ParameterVector,
    make_rng,
    make_scenario,
    simulate_choices,
)
from .errors import InputError, SchemaError

BLOCK_SIZE = 4096


@dataclass(frozen=True, eq=False)
class ChainTruth:
    """Linear map from the non-price indicators to construct scores.

    ``terminal`` is a parameter vector over the constructs plus price; the
    consumer's utility is evaluated on the (noisy) construct scores.
    """

    construct_names: tuple
    weights: np.ndarray
    intercepts: np.ndarray
    noise_sd: np.ndarray
    terminal: ParameterVector

    def __post_init__(self):
        object.__setattr__(self, "construct_names", tuple(self.construct_names))
        c = len(self.construct_names)
        object.__setattr__(self, "weights", np.array(self.weights, dtype=float).reshape(c, -1))
        object.__setattr__(self, "intercepts", np.array(self.intercepts, dtype=float).reshape(c))
        object.__setattr__(self, "noise_sd", np.array(self.noise_sd, dtype=float).reshape(c))
        if np.any(self.noise_sd < 0):
            raise InputError("construct noise must be non-negative")
        expected = self.construct_names + ("price",)
        if self.terminal.schema.names != expected:
            raise SchemaError(f"terminal parameters must cover {expected}")


@dataclass(frozen=True, eq=False)
class GroundTruthSpec:
    """Everything needed to regenerate a synthetic market.

    Exactly one of ``true_params`` (possibly with ``random_stddev`` for a
    mixed-logit population) or ``classes``/``class_shares`` is given.
    """

    schema: AttributeSchema
    bounds: tuple
    true_params: ParameterVector | None = None
    classes: tuple = ()
    class_shares: tuple = ()
    random_stddev: dict = field(default_factory=dict)
    population_size: int = 5000
    seed: int = 0
    n_alternatives: int = 2
    outside_option: bool = True
    levels_per_attribute: int = 5
    chain: ChainTruth | None = None
    name: str = "custom"

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != len(self.schema):
            raise InputError("one (lower, upper) bound per attribute is required")
        for name, (lo, hi) in zip(self.schema.names, bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise InputError(f"bad bounds for '{name}': [{lo}, {hi}]")
        if bounds[self.schema.price_index][0] < 0:
            raise InputError("price bounds must be non-negative")
        if (self.true_params is None) == (not self.classes):
            raise InputError("give either true_params or latent classes")
        if self.classes:
            shares = np.asarray(self.class_shares, dtype=float)
            if shares.size != len(self.classes) or np.any(shares <= 0) or abs(shares.sum() - 1) > 1e-12:
                raise InputError("class shares must be positive and sum to 1")
            if any(p.schema != self.schema for p in self.classes):
                raise SchemaError("class parameters must use the spec schema")
        elif self.true_params.schema != self.schema and self.chain is None:
            raise SchemaError("true parameters must use the spec schema")
        for name, sd in self.random_stddev.items():
            self.schema.index(name)
            if not sd >= 0:
                raise InputError(f"stddev for '{name}' must be non-negative")
        if self.random_stddev and self.classes:
            raise InputError("random coefficients and latent classes cannot be combined")
        if self.population_size < 1:
            raise InputError("population size must be positive")
        if self.n_alternatives + int(self.outside_option) < 2:
            raise InputError("scenarios need at least two effective alternatives")
        if self.chain is not None and self.chain.weights.shape[1] != len(self.schema) - 1:
            raise SchemaError("chain weights must cover every non-price indicator")

    def replace(self, **changes) -> GroundTruthSpec:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "attributes": list(self.schema.names),
            "bounds": {n: list(b) for n, b in zip(self.schema.names, self.bounds)},
            "population_size": self.population_size,
            "seed": self.seed,
            "n_alternatives": self.n_alternatives,
            "outside_option": self.outside_option,
            "levels_per_attribute": self.levels_per_attribute,
        }
        if self.true_params is not None:
            out["betas"] = self.true_params.as_dict()
            out["alternative_constants"] = self.true_params.alternative_constants.tolist()
        if self.classes:
            out["classes"] = [p.as_dict() for p in self.classes]
            out["class_shares"] = list(self.class_shares)
        if self.random_stddev:
            out["random_stddev"] = dict(self.random_stddev)
        if self.chain is not None:
            ch = self.chain
            out["chain"] = {
                "constructs": list(ch.construct_names),
                "weights": ch.weights.tolist(),
                "intercepts": ch.intercepts.tolist(),
                "noise_sd": ch.noise_sd.tolist(),
                "terminal": ch.terminal.as_dict(),
            }
        return out


def _streams(seed: int):
    """Independent seed sequences for the design and the consumers."""
    design, consumers = np.random.SeedSequence(seed).spawn(2)
    return design, consumers


def generate_design(spec: GroundTruthSpec, n_scenarios: int | None = None,
                    levels_per_attribute: int | None = None) -> np.ndarray:
    """Balanced level design, shape (n_scenarios, n_alternatives, n_attributes).

    For every alternative slot and attribute, level ``l`` appears
    ``n // L`` or ``n // L + 1`` times.  Scenarios in which every attribute of
    every alternative sits at its top level are repaired by swapping the
    price level with another scenario, which keeps the histograms intact.
    """
    n = spec.population_size if n_scenarios is None else int(n_scenarios)
    levels = spec.levels_per_attribute if levels_per_attribute is None else int(levels_per_attribute)
    if n < 1:
        raise InputError("at least one scenario is required")
    if levels < 2:
        raise InputError("at least two levels per attribute are required for identification")
    rng = make_rng(_streams(spec.seed)[0])
    J, K = spec.n_alternatives, len(spec.schema)
    idx = np.empty((n, J, K), dtype=np.int64)
    base = np.arange(n) % levels
    for a in range(J):
        for k in range(K):
            idx[:, a, k] = rng.permutation(base)
    top = levels - 1
    p = spec.schema.price_index
    for i in np.flatnonzero(np.all(idx == top, axis=(1, 2))):
        donors = np.flatnonzero(idx[:, 0, p] != top)
        if donors.size == 0:
            raise InputError("design too small to avoid an all-maximum scenario")
        d = donors[0]
        idx[i, 0, p], idx[d, 0, p] = idx[d, 0, p], idx[i, 0, p]
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    return lo + (hi - lo) * idx / (levels - 1)


def generate_scenarios(spec: GroundTruthSpec, n_scenarios: int | None = None,
                       levels_per_attribute: int | None = None) -> list[ChoiceScenario]:
    design = generate_design(spec, n_scenarios, levels_per_attribute)
    return [make_scenario(spec.schema, rows, spec.outside_option) for rows in design]


def _draw_betas(spec: GroundTruthSpec, rng, n: int) -> np.ndarray:
    if spec.classes:
        shares = np.asarray(spec.class_shares)
        u = rng.random(n)
        cls = np.minimum(np.searchsorted(np.cumsum(shares), u, side="right"), len(shares) - 1)
        return np.stack([p.betas for p in spec.classes])[cls], cls
    means = np.broadcast_to(spec.true_params.betas, (n, spec.true_params.betas.size)).copy()
    names = spec.true_params.schema.names
    for name in sorted(spec.random_stddev, key=names.index):
        k = names.index(name)
        means[:, k] += spec.random_stddev[name] * rng.standard_normal(n)
    return means, None


def _constants(spec: GroundTruthSpec) -> np.ndarray:
    params = spec.classes[0] if spec.classes else spec.true_params
    return params.with_constants(spec.n_alternatives).alternative_constants


def generate_dataset(spec: GroundTruthSpec, scenarios=None) -> ChoiceDataset:
    """Simulate one choice per scenario from the ground-truth population.

    ``scenarios`` may be a list of :class:`ChoiceScenario`, a design array,
    or ``None`` for the spec's own balanced design.
    """
    if scenarios is None:
        X = generate_design(spec)
    elif isinstance(scenarios, np.ndarray):
        X = np.asarray(scenarios, dtype=float)
    else:
        scenarios = list(scenarios)
        if not scenarios:
            raise InputError("no scenarios to simulate")
        X = np.stack([s.matrix() for s in scenarios])
    if X.ndim != 3 or X.shape[0] == 0:
        raise InputError("no scenarios to simulate")
    if X.shape[1:] != (spec.n_alternatives, len(spec.schema)):
        raise SchemaError("scenarios do not match the spec layout")
    n = X.shape[0]
    n_blocks = -(-n // BLOCK_SIZE)
    children = _streams(spec.seed)[1].spawn(n_blocks)
    chosen = np.empty(n, dtype=np.int64)
    constructs = None
    if spec.chain is not None:
        constructs = np.empty((n, spec.n_alternatives, len(spec.chain.construct_names)))
    asc = _constants(spec)
    indicator_idx = spec.schema.non_price_indices
    p = spec.schema.price_index
    for b, child in enumerate(children):
        rng = make_rng(child)
        sl = slice(b * BLOCK_SIZE, min(n, (b + 1) * BLOCK_SIZE))
        Xb = X[sl]
        if spec.chain is None:
            betas, _ = _draw_betas(spec, rng, Xb.shape[0])
            V = np.einsum("njk,nk->nj", Xb, betas) + asc
        else:
            ch = spec.chain
            noise = rng.standard_normal((Xb.shape[0], Xb.shape[1], ch.noise_sd.size)) * ch.noise_sd
            zb = Xb[:, :, indicator_idx] @ ch.weights.T + ch.intercepts + noise
            constructs[sl] = zb
            full = np.concatenate([zb, Xb[:, :, [p]]], axis=2)
            V = full @ ch.terminal.betas + ch.terminal.with_constants(spec.n_alternatives).alternative_constants
        if spec.outside_option:
            V = np.concatenate([V, np.zeros((V.shape[0], 1))], axis=1)
        chosen[sl] = simulate_choices(V, rng)
    names = spec.chain.construct_names if spec.chain is not None else ()
    return ChoiceDataset(spec.schema, X, chosen, spec.outside_option, constructs, names)


# --- named configurations ---------------------------------------------------

VIRTUAL_TRAVELING = AttributeSchema(("sensing", "rate", "latency", "comfort", "price"))
VIRTUAL_TRAVELING_BOUNDS = ((0.0, 1.0), (10.0, 200.0), (10.0, 200.0), (1.0, 5.0), (1.0, 30.0))
# rate in 100 Mbps, latency in 100 ms
VIRTUAL_TRAVELING_UNIT_BOUNDS = ((0.0, 1.0), (0.1, 2.0), (0.1, 2.0), (1.0, 5.0), (1.0, 30.0))
DEFAULT_BETAS = (0.8, 0.01, -0.01, 0.3, -0.15)


def _vt(betas):
    return ParameterVector(betas, VIRTUAL_TRAVELING)


def _chain_truth() -> ChainTruth:
    constructs = AttributeSchema(("authenticity", "enjoyment", "price"))
    return ChainTruth(
        construct_names=("authenticity", "enjoyment"),
        weights=[[2.0, 0.005, -0.005, 0.1], [0.5, 0.002, -0.002, 0.4]],
        intercepts=[0.5, 0.2],
        noise_sd=[0.3, 0.3],
        terminal=ParameterVector((0.8, 0.6, -0.15), constructs),
    )


def _composed(chain: ChainTruth) -> np.ndarray:
    """Indicator-level betas implied by the chain (construct intercepts dropped)."""
    direct = chain.terminal.betas[:-1] @ chain.weights
    return np.append(direct, chain.terminal.betas[-1])


def _registry() -> dict:
    chain = _chain_truth()
    return {
        "virtual-traveling-default": GroundTruthSpec(
            VIRTUAL_TRAVELING, VIRTUAL_TRAVELING_BOUNDS, true_params=_vt(DEFAULT_BETAS),
            name="virtual-traveling-default"),
        "virtual-traveling-unit": GroundTruthSpec(
            VIRTUAL_TRAVELING, VIRTUAL_TRAVELING_UNIT_BOUNDS,
            true_params=_vt((0.8, 1.0, -0.6, 0.5, -0.3)), name="virtual-traveling-unit"),
        "virtual-traveling-two-class": GroundTruthSpec(
            VIRTUAL_TRAVELING, VIRTUAL_TRAVELING_BOUNDS,
            classes=(_vt((0.8, 0.01, -0.01, 0.3, -0.1)), _vt((0.8, 0.01, -0.01, 0.3, -0.9))),
            class_shares=(0.6, 0.4), population_size=10000, name="virtual-traveling-two-class"),
        # price capped at 10: at 30 a purchase is a far-tail event of the
        # price distribution and the simulated likelihood becomes draw-sensitive
        "virtual-traveling-mixed": GroundTruthSpec(
            VIRTUAL_TRAVELING, VIRTUAL_TRAVELING_BOUNDS[:4] + ((1.0, 10.0),),
            true_params=_vt((0.8, 0.01, -0.01, 0.3, -0.5)), random_stddev={"price": 0.2},
            population_size=10000, name="virtual-traveling-mixed"),
        "virtual-traveling-chain": GroundTruthSpec(
            VIRTUAL_TRAVELING, VIRTUAL_TRAVELING_BOUNDS, true_params=_vt(_composed(chain)),
            chain=chain, population_size=10000, name="virtual-traveling-chain"),
    }


SPEC_NAMES = tuple(_registry())


def named_spec(name: str, **overrides) -> GroundTruthSpec:
    try:
        spec = _registry()[name]
    except KeyError:
        raise InputError(f"unknown spec '{name}'; choose from {', '.join(SPEC_NAMES)}") from None
    return spec.replace(**overrides) if overrides else spec


# --- recovery harness ---------------------------------------------------------

ESTIMATORS = ("mnl", "lcm", "mixed")
SHARE_TOLERANCE = 0.05


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    """Estimates against ground truth, coordinate by coordinate.

    A coordinate passes when its bias is within ``se_threshold`` standard
    errors; latent-class shares pass within ``SHARE_TOLERANCE`` instead.
    """

    estimator: str
    names: tuple
    truth: np.ndarray
    estimates: np.ndarray
    standard_errors: np.ndarray
    covered: np.ndarray
    coordinate_passed: np.ndarray
    log_likelihood: float
    result: object

    @property
    def bias(self) -> np.ndarray:
        return self.estimates - self.truth

    @property
    def coverage(self) -> float:
        return float(np.mean(self.covered))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.coordinate_passed))

    def lines(self) -> list[str]:
        out = [f"estimator: {self.estimator}", f"log-likelihood: {self.log_likelihood!r}"]
        for name, t, e, s, ok in zip(self.names, self.truth, self.estimates, self.standard_errors,
                                     self.coordinate_passed):
            out.append(f"{name}: truth {t:.6g} estimate {e:.6g} se {s:.3g} {'pass' if ok else 'FAIL'}")
        out.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return out


def recovery_report(spec: GroundTruthSpec, estimator: str = "mnl", n_observations: int | None = None,
                    se_threshold: float = 3.0, n_classes: int | None = None, n_draws: int = 200,
                    config=None) -> RecoveryReport:
    """Generate data from ``spec``, fit ``estimator`` and compare with the truth.

    Constants are fitted and compared with the spec's constants.  For
    ``lcm`` the true classes are ordered by descending price coefficient to
    match the estimator's canonical labelling; ``n_classes`` may differ from
    the truth only when ``estimator`` is deliberately misspecified, in which
    case no coordinate comparison is made.
    """
    from .estimation.latent_class import fit_latent_class
    from .estimation.mixed import fit_mixed_logit
    from .estimation.mnl import Z_95, fit_mnl

    if estimator not in ESTIMATORS:
        raise InputError(f"estimator must be one of {', '.join(ESTIMATORS)}")
    n = spec.population_size if n_observations is None else n_observations
    if int(n) != n or n < 1:
        raise InputError("at least one observation is required")
    data = generate_dataset(spec, generate_design(spec, int(n)))
    n_alt = data.n_alternatives
    names, truth, est, se, is_share = [], [], [], [], []

    def add(prefix, params, true_params, errors):
        width = len(spec.schema) + n_alt - 1
        true_theta = np.concatenate([true_params.betas, true_params.with_constants(n_alt).alternative_constants[1:]])
        est_theta = np.concatenate([params.betas, params.with_constants(n_alt).alternative_constants[1:]])
        labels = list(spec.schema.names) + [f"asc_{j}" for j in range(1, n_alt)]
        names.extend(prefix + lab for lab in labels)
        truth.extend(true_theta)
        est.extend(est_theta)
        se.extend(np.asarray(errors)[:width])
        is_share.extend([False] * width)

    if estimator == "mnl":
        if spec.true_params is None:
            raise InputError("an MNL recovery needs a single-class spec")
        result = fit_mnl(data, config)
        add("", result.params, spec.true_params, result.standard_errors)
        ll = result.log_likelihood_at_optimum
    elif estimator == "lcm":
        true_classes = list(spec.classes) if spec.classes else [spec.true_params]
        true_shares = list(spec.class_shares) if spec.classes else [1.0]
        k = len(true_classes) if n_classes is None else n_classes
        result = fit_latent_class(data, k, config)
        ll = result.log_likelihood
        if k == len(true_classes):
            order = sorted(range(k), key=lambda c: -true_classes[c].price_coefficient)
            for pos, c in enumerate(order):
                add(f"class{pos}.", result.class_params[pos], true_classes[c], result.standard_errors[pos])
            for pos, c in enumerate(order):
                names.append(f"share{pos}")
                truth.append(true_shares[c])
                est.append(result.class_shares[pos])
                se.append(np.nan)
                is_share.append(True)
    else:
        if spec.true_params is None:
            raise InputError("a mixed-logit recovery needs a single-class spec")
        random = tuple(spec.random_stddev) or ("price",)
        result = fit_mixed_logit(data, random, n_draws, config)
        add("", result.params, spec.true_params, result.standard_errors)
        for j, r in enumerate(random):
            names.append(f"sd_{r}")
            truth.append(spec.random_stddev.get(r, 0.0))
            est.append(result.stddev_betas[spec.schema.index(r)])
            se.append(result.standard_errors[len(result.standard_errors) - len(random) + j])
            is_share.append(False)
        ll = result.simulated_log_likelihood

    truth, est, se = (np.asarray(a, dtype=float) for a in (truth, est, se))
    is_share = np.asarray(is_share, dtype=bool)
    bias = np.abs(est - truth)
    with np.errstate(invalid="ignore"):
        covered = np.where(is_share, bias <= SHARE_TOLERANCE, bias <= Z_95 * se)
        passed = np.where(is_share, bias <= SHARE_TOLERANCE, bias <= se_threshold * se)
    return RecoveryReport(estimator, tuple(names), truth, est, se, covered, passed, float(ll), result)
