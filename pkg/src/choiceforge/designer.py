"""Revenue and profit optimisation of a single service offer.

The offer competes against the no-purchase option, so its purchase
probability is ``1 / (1 + exp(-V))`` with ``V`` the offer's systematic
utility.  Price is searched by golden section (revenue and profit are
unimodal in price for a linear-in-price logit); attribute levels by
coordinate ascent with the price re-optimised inside every evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .analytics import wtp
from .core import AttributeSchema, AttributeVector, ParameterVector, choice_probabilities, make_rng, make_scenario
from .errors import InputError, SchemaError, UnboundedRevenueError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
REVENUE = "revenue"
PROFIT = "profit"


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The endpoints are compared at the end so a boundary optimum is returned
    exactly.
    """
    a, b = float(lo), float(hi)
    if b < a:
        raise InputError(f"empty interval [{lo}, {hi}]")
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    for x in (float(lo), float(hi)):
        fx = f(x)
        if fx > best[1]:
            best = (x, fx)
    return best


@dataclass(frozen=True)
class DesignSpace:
    """Box of feasible indicator levels and prices with a linear per-user cost.

    ``bounds`` maps optimised indicators to ``(lower, upper)``; indicators
    not listed stay at ``fixed_levels``.  ``cost`` maps indicators to cost per
    unit level; ``base_cost`` is a fixed per-user cost.
    """

    schema: AttributeSchema
    bounds: dict
    price_bounds: tuple
    fixed_levels: dict = field(default_factory=dict)
    cost: dict | None = None
    base_cost: float = 0.0

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            k = self.schema.index(name)
            if k == self.schema.price_index:
                raise SchemaError("price bounds go in price_bounds")
            if not lo <= hi:
                raise InputError(f"empty design space for '{name}': [{lo}, {hi}]")
        lo, hi = self.price_bounds
        if not 0 <= lo <= hi:
            raise InputError(f"empty or negative price range [{lo}, {hi}]")
        missing = [n for i, n in enumerate(self.schema.names)
                   if i != self.schema.price_index and n not in self.bounds and n not in self.fixed_levels]
        if missing:
            raise InputError(f"no bounds or fixed level for {missing}")
        if self.cost is not None:
            for name, c in self.cost.items():
                self.schema.index(name)
                if c < 0:
                    raise InputError(f"cost coefficient for '{name}' must be non-negative")
        if self.base_cost < 0:
            raise InputError("base cost must be non-negative")

    @property
    def free_attributes(self) -> list[str]:
        return [n for n in self.schema.names if n in self.bounds]

    def per_user_cost(self, levels) -> float:
        if self.cost is None:
            return 0.0
        return self.base_cost + sum(c * levels[self.schema.index(n)] for n, c in self.cost.items())


@dataclass(frozen=True, eq=False)
class DesignSolution:
    price: float
    attribute_levels: np.ndarray
    purchase_probability: float
    objective_value: float
    objective: str
    unit_cost: float
    curve: tuple
    start_index: int = 0

    def reevaluate(self, params: ParameterVector) -> tuple[float, float]:
        """Purchase probability and objective recomputed from the stored inputs."""
        levels = self.attribute_levels.copy()
        levels[params.schema.price_index] = self.price
        v = offer_utility(params, levels)
        p = float(expit(v))
        return p, (self.price - self.unit_cost) * p


def _levels_vector(params: ParameterVector, attribute_levels) -> np.ndarray:
    schema = params.schema
    if isinstance(attribute_levels, AttributeVector):
        return attribute_levels.values.copy()
    if isinstance(attribute_levels, dict):
        out = np.zeros(len(schema))
        for name, value in attribute_levels.items():
            out[schema.index(name)] = value
        missing = [n for i, n in enumerate(schema.names)
                   if i != schema.price_index and n not in attribute_levels]
        if missing:
            raise SchemaError(f"missing attribute levels for {missing}")
        return out
    arr = np.array(attribute_levels, dtype=float).reshape(-1)
    if arr.size == len(schema):
        return arr
    if arr.size == len(schema) - 1:
        return np.insert(arr, schema.price_index, 0.0)
    raise SchemaError(f"{arr.size} attribute levels for schema {schema.names}")


def offer_utility(params: ParameterVector, levels) -> float:
    return float(params.alternative_constants[0] + np.dot(params.betas, levels))


def _require_downward_demand(params: ParameterVector) -> float:
    b = params.price_coefficient
    if not b < 0:
        raise UnboundedRevenueError(f"price coefficient {b!r} >= 0: revenue grows without bound")
    return b


def revenue_curve(params: ParameterVector, attribute_levels, price_grid) -> list[tuple]:
    """``(price, utility, purchase probability, revenue)`` at each grid price."""
    b = _require_downward_demand(params)
    grid = np.asarray(price_grid, dtype=float).reshape(-1)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise InputError("price grid must be non-empty and strictly increasing")
    if grid[0] < 0:
        raise InputError("prices must be non-negative")
    levels = _levels_vector(params, attribute_levels)
    levels[params.schema.price_index] = 0.0
    v0 = offer_utility(params, levels)
    v = v0 + b * grid
    p = expit(v)
    return [(float(g), float(u), float(q), float(g * q)) for g, u, q in zip(grid, v, p)]


def _best_price(v0: float, b: float, unit_cost: float, lo: float, hi: float, tol: float = 1e-10):
    """Golden-section price search for ``(p - unit_cost) * expit(v0 + b p)``."""

    def obj(p):
        return (p - unit_cost) * expit(v0 + b * p)

    return golden_section_max(obj, lo, hi, tol)


def optimize_price(params: ParameterVector, attribute_levels, price_bounds,
                   grid_size: int = 1000, unit_cost: float = 0.0, tol: float = 1e-10) -> DesignSolution:
    """Best subscription price for fixed attribute levels.

    The golden-section result is audited against a ``grid_size`` grid over
    the bounds; if a grid point beats it, the search is repeated on that
    point's neighbourhood.
    """
    b = _require_downward_demand(params)
    lo, hi = map(float, price_bounds)
    if not 0 <= lo <= hi:
        raise InputError(f"bad price bounds [{lo}, {hi}]")
    if grid_size < 2:
        raise InputError("grid needs at least two points")
    levels = _levels_vector(params, attribute_levels)
    levels[params.schema.price_index] = 0.0
    v0 = offer_utility(params, levels)
    p_star, f_star = _best_price(v0, b, unit_cost, lo, hi, tol)
    grid = np.linspace(lo, hi, grid_size) if hi > lo else np.array([lo, lo + 1.0])
    values = (grid - unit_cost) * expit(v0 + b * grid)
    i = int(np.argmax(values))
    if values[i] > f_star:
        a_, b_ = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        p2, f2 = _best_price(v0, b, unit_cost, a_, b_, tol)
        p_star, f_star = (p2, f2) if f2 > values[i] else (float(grid[i]), float(values[i]))
    levels[params.schema.price_index] = p_star
    curve_grid = grid if hi > lo else np.array([lo])
    curve = tuple(revenue_curve(params, levels, curve_grid))
    prob = float(expit(v0 + b * p_star))
    return DesignSolution(p_star, levels, prob, (p_star - unit_cost) * prob,
                          PROFIT if unit_cost else REVENUE, unit_cost, curve)


def optimize_design(params: ParameterVector, space: DesignSpace, objective: str = REVENUE,
                    n_starts: int = 8, seed: int = 0, tol: float = 1e-8, max_sweeps: int = 200,
                    grid_size: int = 1000, audit_points: int = 50) -> DesignSolution:
    """Jointly choose indicator levels and price.

    Coordinate ascent: each sweep line-searches every free indicator in turn
    (a coarse audit grid of ``audit_points`` plus golden-section refinement
    of the best bracket), with the price re-optimised by golden section at
    every trial point.  Sweeps stop once the objective gains less than
    ``tol``.  Starts are the box centre and seeded random corners; the best
    objective wins, earliest start on ties.
    """
    b = _require_downward_demand(params)
    if params.schema != space.schema:
        raise SchemaError("design space and parameters use different schemas")
    if objective not in (REVENUE, PROFIT):
        raise InputError(f"objective must be '{REVENUE}' or '{PROFIT}'")
    if objective == PROFIT and space.cost is None:
        raise InputError("profit objective needs a cost model")
    schema = space.schema
    p_idx = schema.price_index
    lo_p, hi_p = map(float, space.price_bounds)
    free = [schema.index(n) for n in space.free_attributes]
    base = np.zeros(len(schema))
    for name, value in space.fixed_levels.items():
        base[schema.index(name)] = value

    def unit_cost(levels):
        return space.per_user_cost(levels) if objective == PROFIT else 0.0

    def value(levels):
        lv = levels.copy()
        lv[p_idx] = 0.0
        return _best_price(offer_utility(params, lv), b, unit_cost(lv), lo_p, hi_p)[1]

    rng = make_rng(seed)
    lows = np.array([space.bounds[schema.names[k]][0] for k in free])
    highs = np.array([space.bounds[schema.names[k]][1] for k in free])
    starts = [(lows + highs) / 2.0]
    for _ in range(max(n_starts - 1, 0)):
        corner = rng.integers(0, 2, size=len(free)).astype(bool)
        starts.append(np.where(corner, highs, lows))

    best = None
    for s_index, start in enumerate(starts):
        levels = base.copy()
        levels[free] = start
        current = value(levels)
        for _ in range(max_sweeps):
            before = current
            for j, k in enumerate(free):
                def along(t, k=k):
                    trial = levels.copy()
                    trial[k] = t
                    return value(trial)

                ts = np.linspace(lows[j], highs[j], audit_points)
                vals = np.array([along(t) for t in ts])
                i = int(np.argmax(vals))
                t_star, f_star = golden_section_max(along, ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)], 1e-10)
                if vals[i] > f_star:
                    t_star, f_star = ts[i], vals[i]
                if f_star > current:
                    levels[k] = t_star
                    current = f_star
            if current - before < tol:
                break
        if best is None or current > best[1]:
            best = (levels.copy(), current, s_index)

    levels, _, s_index = best
    sol = optimize_price(params, levels, (lo_p, hi_p), grid_size, unit_cost(levels))
    return DesignSolution(sol.price, sol.attribute_levels, sol.purchase_probability, sol.objective_value,
                          objective, sol.unit_cost, sol.curve, s_index)


@dataclass(frozen=True)
class PremiumReport:
    probabilities: dict
    adopters: dict
    incremental_wtp: float


def premium_share(params: ParameterVector, base_offer: AttributeVector, premium_offer: AttributeVector,
                  population_size: float) -> PremiumReport:
    """Split of a population between a base offer, a premium offer and no purchase.

    Both offers are generic alternatives (they share the first alternative's
    constant).  ``incremental_wtp`` is the currency value of the premium's
    non-price attribute upgrades.
    """
    if base_offer.schema != premium_offer.schema or base_offer.schema != params.schema:
        raise SchemaError("offers and parameters must share one schema")
    schema = params.schema
    generic = ParameterVector(params.betas, schema, np.zeros(2) + params.alternative_constants[0])
    scenario = make_scenario(schema, [base_offer.values, premium_offer.values], outside_option=True)
    probs = choice_probabilities(generic, scenario)
    labels = ("base", "premium", "outside")
    report = wtp(params)
    delta = premium_offer.values - base_offer.values
    inc = sum(report.per_attribute_wtp[schema.names[k]] * delta[k] for k in schema.non_price_indices)
    return PremiumReport(
        {k: float(p) for k, p in zip(labels, probs)},
        {k: float(population_size * p) for k, p in zip(labels, probs)},
        float(inc),
    )
