"""Independent reference computations used to check the package.

Nothing here imports choiceforge numerics: probabilities and likelihoods are
recomputed with the ``math`` module observation by observation, optima come
from closed forms or brute-force grids.  Values frozen into the tests were
produced by these functions (see ``FROZEN``) and are re-derived in
``test_oracles.py`` so the provenance stays checkable.
"""

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw


def logit_py(utilities):
    m = max(utilities)
    e = [math.exp(u - m) for u in utilities]
    s = math.fsum(e)
    return [x / s for x in e]


def loglik_py(betas, constants, attributes, chosen, outside):
    """Log-likelihood by explicit loops; ``attributes`` is (N, J, K)."""
    total = []
    for x_obs, c in zip(np.asarray(attributes).tolist(), np.asarray(chosen).tolist()):
        v = [constants[j] + math.fsum(b * x for b, x in zip(betas, row)) for j, row in enumerate(x_obs)]
        if outside:
            v.append(0.0)
        total.append(math.log(logit_py(v)[c]))
    return math.fsum(total)


def central_difference(f, x, step=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def optimal_price_closed_form(a, b):
    """Revenue-maximising price for ``V(p) = a - b p`` against the outside option.

    The first-order condition ``b p (1 - P) = 1`` rearranges to
    ``(b p - 1) exp(b p - 1) = exp(a - 1)``, so ``b p = 1 + W(exp(a - 1))``.
    """
    return float((1.0 + lambertw(math.exp(a - 1.0)).real) / b)


def optimal_price_root(a, b, hi=None):
    def foc(p):
        P = 1.0 / (1.0 + math.exp(-(a - b * p)))
        return b * p * (1.0 - P) - 1.0

    hi = (a + 30.0) / b if hi is None else hi
    return brentq(foc, 0.0, hi, xtol=1e-15)


def brute_force_profit(v0, beta_level, beta_price, cost, level_bounds, price_bounds, n=50):
    """Best (level, price) for ``(p - cost * level) * P`` on an ``n x n`` grid."""
    levels = np.linspace(*level_bounds, n)
    prices = np.linspace(*price_bounds, n)
    best = (-math.inf, None, None)
    for x in levels:
        for p in prices:
            P = 1.0 / (1.0 + math.exp(-(v0 + beta_level * x + beta_price * p)))
            val = (p - cost * x) * P
            if val > best[0]:
                best = (val, x, p)
    return best


FROZEN = {
    # e / (1 + e)
    "p_binary_v1": 0.7310585786300049,
    "ln_half": -0.6931471805599453,
    # optimal_price_closed_form(2, 1): W(e) = 1
    "p_star_a2": 2.0,
    # optimal_price_closed_form(4, 1)
    "p_star_a4": 3.207940031569323,
    # -(0.02 * 50) / (-0.3)
    "premium_wtp": 3.3333333333333335,
    # 0.8 * 1 + (-0.3) * 10 + 0.5
    "utility_example": -1.7000000000000002,
}
