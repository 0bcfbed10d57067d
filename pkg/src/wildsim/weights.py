"""Scalar leaf-weight arrays and their closed-form expectations.

Each leaf of a collision tree carries, for every Legendre order k, the
product of P_k(cos phi) / P_k(sin phi) factors collected along its
root-to-leaf path (cosine on left turns, sine on right turns).  Order
k = 1 gives the amplitude weights whose squares sum to one; k = 2 and
k = 3 are the quadratic and cubic families entering the conditional
moment identities.  The mean of sum_j |weight_j|^s over the growth chain
obeys a one-dimensional recursion with closed form `expected_sum_closed_form`.

Also here: the quartic concentration statistic W = sum_j w_j^4, the Newton
elementary-symmetric bound used for uniform integrability of the envelope,
and the envelope function itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArityMismatch, NotNormalized, WrongOrder
from .tree import McKeanTree

SUM_SQUARES_TOL = 1e-9


def legendre_value(k: int, x):
    """P_k(x) by the three-term recurrence, vectorized in x."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        return np.ones_like(x)
    prev, cur = np.ones_like(x), x
    for m in range(1, k):
        prev, cur = cur, ((2 * m + 1) * x * cur - m * prev) / (m + 1)
    return cur


@dataclass(frozen=True)
class WeightArray:
    """Leaf weights of one (tree, angles) configuration at Legendre order k."""

    values: np.ndarray
    order: int
    provenance: tuple | None = None

    def __len__(self):
        return len(self.values)

    def sum_abs_power(self, s: float) -> float:
        return float(np.sum(np.abs(self.values) ** s))


def leaf_weights(tree: McKeanTree, phis: Sequence[float], k: int = 1) -> WeightArray:
    """Evaluate the order-k weight of every leaf, in left-to-right order.

    phis must hold leaf_count - 1 angles; the last one belongs to the root
    split, the first n_l - 1 to the left subtree, the remainder to the right.
    """
    phis = np.asarray(phis, dtype=float)
    if phis.shape != (tree.leaf_count - 1,):
        raise ArityMismatch(
            f"need {tree.leaf_count - 1} angles for {tree.leaf_count} leaves, "
            f"got {phis.shape}"
        )
    out: list[float] = []
    _fill_weights(tree, phis, k, 1.0, out)
    return WeightArray(values=np.array(out), order=k)


def _fill_weights(tree, phis, k, factor, out):
    if tree.is_leaf:
        out.append(factor)
        return
    c, s = math.cos(phis[-1]), math.sin(phis[-1])
    n_l = tree.left.leaf_count
    _fill_weights(tree.left, phis[: n_l - 1], k, factor * float(legendre_value(k, c)), out)
    _fill_weights(tree.right, phis[n_l - 1 : -1], k, factor * float(legendre_value(k, s)), out)


def w_statistic(pi: WeightArray) -> float:
    """Quartic concentration W = sum_j pi_j^4; lies in [1/n, 1]."""
    if pi.order != 1:
        raise WrongOrder(f"W is defined for order-1 weights, got order {pi.order}")
    return float(np.sum(pi.values**4))


def expected_sum_closed_form(alpha: float, n: int | None = None, t: float | None = None):
    """Mean of sum_j |weight_j|^s over the chain, with alpha the per-split factor.

    For fixed tree size n the value a_n obeys a_1 = 1,
    a_{n+1} = (1 + (2 alpha - 1)/n) a_n; when 1 - 2 alpha is a positive
    integer m this collapses to signed binomials that vanish for n > m.
    Mixing over the geometric size law at time t gives exp(-(1 - 2 alpha) t).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if (n is None) == (t is None):
        raise ValueError("give exactly one of n, t")
    if t is not None:
        if t < 0:
            raise ValueError("t must be nonnegative")
        return math.exp(-(1.0 - 2.0 * alpha) * t)
    if n < 1:
        raise ValueError("n must be >= 1")
    m = 1.0 - 2.0 * alpha
    m_int = round(m)
    if m_int >= 1 and abs(m - m_int) < 1e-12:
        # integer branch: avoids the gamma-function poles
        if n > m_int:
            return 0.0
        return float((-1) ** (n + 1) * math.comb(m_int - 1, n - 1))
    value = 1.0
    for size in range(1, n):
        value *= 1.0 + (2.0 * alpha - 1.0) / size
    return value


def partition_parameters(p: float) -> tuple[int, float]:
    """Tail exponent p -> (r, a_star) = (11 ceil(2/p), 1/(2^r r!))."""
    if p <= 0:
        raise ValueError("tail exponent p must be positive")
    r = 11 * math.ceil(2.0 / p)
    return r, 1.0 / (2.0**r * math.factorial(r))


@dataclass(frozen=True)
class SymmetricBoundReport:
    """Newton-identity audit of one squared-weight configuration."""

    power_sums: np.ndarray        # N_1..N_K
    elementary: np.ndarray        # S_0..S_K
    hypothesis_met: bool          # N_2 <= a_star
    lower_bounds: np.ndarray      # 1/k! - 2^(k-1) a_star for k = 1..K
    asserted: np.ndarray          # bound claimed only for k <= n under the hypothesis
    bound_holds: np.ndarray       # per k, vacuously true where not asserted
    product_bound_checked: bool
    product_bound_holds: bool


def symmetric_function_bound(
    weights_squared: Sequence[float],
    r: int,
    a_star: float,
    k_max: int | None = None,
    x_grid: Sequence[float] | None = None,
) -> SymmetricBoundReport:
    """Check S_k >= 1/k! - 2^(k-1) a_star and the product lower bound.

    weights_squared must sum to one (the first power sum).  Elementary
    symmetric functions come from the Newton identities

        k S_k = sum_{j=1..k} (-1)^(j+1) N_j S_{k-j},   S_0 = 1.

    When the configuration has at least r entries and N_2 <= a_star with
    a_star <= 1/(2^r r!), the product prod_j (1 + a_j x^2) dominates
    x^(2r) / (2 r!) for every x; this is evaluated on x_grid.
    """
    a = np.asarray(weights_squared, dtype=float)
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise NotNormalized("squared weights must lie in [0, 1]")
    if abs(float(np.sum(a)) - 1.0) > SUM_SQUARES_TOL:
        raise NotNormalized(f"squared weights sum to {np.sum(a):.12f}, not 1")
    n = len(a)
    kk = 8 if k_max is None else int(k_max)

    # the Newton recursion stays valid beyond n entries with S_k = 0 there
    power_sums = np.array([float(np.sum(a**k)) for k in range(1, kk + 1)])
    elementary = np.empty(kk + 1)
    elementary[0] = 1.0
    for k in range(1, kk + 1):
        acc = 0.0
        for j in range(1, k + 1):
            acc += (-1) ** (j + 1) * power_sums[j - 1] * elementary[k - j]
        elementary[k] = acc / k

    n2 = float(np.sum(a * a))
    hypothesis_met = n2 <= a_star
    ks = np.arange(1, kk + 1)
    lower = 1.0 / np.array([math.factorial(int(k)) for k in ks]) - 2.0 ** (ks - 1) * a_star
    asserted = (ks <= n) & hypothesis_met
    holds = (elementary[1:] >= lower - 1e-12) | ~asserted

    checked = bool(n >= r and hypothesis_met)
    product_ok = True
    if checked:
        xs = np.geomspace(0.1, 10.0, 25) if x_grid is None else np.asarray(x_grid, float)
        eps = 1.0 / (2.0 * math.factorial(r))
        for x in xs:
            prod = float(np.prod(1.0 + a * x * x))
            if prod < eps * x ** (2 * r) * (1.0 - 1e-12):
                product_ok = False
                break

    return SymmetricBoundReport(
        power_sums=power_sums,
        elementary=elementary,
        hypothesis_met=bool(hypothesis_met),
        lower_bounds=lower,
        asserted=asserted,
        bound_holds=holds,
        product_bound_checked=checked,
        product_bound_holds=product_ok,
    )


def psi_envelope(lam: float, q: float, pi: WeightArray, rho: float) -> float:
    """Envelope prod_j (lam^2 / (lam^2 + rho^2 pi_j^2))^q at radius rho."""
    if lam <= 0 or q <= 0 or rho < 0:
        raise ValueError("need lam > 0, q > 0, rho >= 0")
    if pi.order != 1:
        raise WrongOrder("envelope takes order-1 weights")
    lam2 = lam * lam
    log_terms = np.log(lam2 / (lam2 + rho * rho * pi.values**2))
    return float(np.exp(q * np.sum(log_terms)))
