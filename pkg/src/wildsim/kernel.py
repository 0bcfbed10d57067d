"""Maxwellian angular collision kernels.

A kernel is a nonnegative function b on (0, 1), normalized so that
int_0^1 b(x) dx = 1, and satisfying the exchange symmetry

    b(x) = b(sqrt(1 - x^2)) * x / sqrt(1 - x^2).

The collision angle phi in [0, pi] is distributed per the angle law
beta(dphi) = (1/2) b(cos phi) sin phi dphi, sampled here through a
tabulated inverse CDF.  The module also computes the spectral functionals
that govern every closed-form decay rate used by the diagnostics:

    lambda_b = -2 int x^2 (1 - x^2) b(x) dx          (spectral gap, <= 0)
    l_s      =    int (1 - x^2)^(s/2) b(x) dx
    f_b      =    int [sin^2 |3/2 sin^2 - 1/2| + cos^2 |3/2 cos^2 - 1/2|] dbeta
    g_b      =    int [sin^4 |5/2 sin^2 - 3/2| + cos^4 |5/2 cos^2 - 3/2|] dbeta

f_b and g_b combine both branch factors of one split, so the quadratic and
cubic weight sums contract by exactly exp(-(1 - f_b) t) and
exp(-(1 - g_b) t); for symmetric kernels the two terms are equal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import (
    NegativeKernel,
    NotNormalizable,
    QuadratureFailure,
    SymmetryViolation,
    BadSpec,
)

QUAD_TOL = 1e-10
SYMMETRY_TOL = 1e-8
SYMMETRY_GRID = 1000
BETA_TABLE_NODES = 16385  # 4 * 4096 + 1, comfortably above the 4096 minimum


# --- preset kernels ---------------------------------------------------------
# All presets solve the exchange symmetry exactly: they have the form
# b(x) = x * G(x^2 (1 - x^2)) with G arbitrary, already normalized.

def _preset_xabs(x):
    return 2.0 * np.abs(x)


def _preset_cubic(x):
    x = np.abs(x)
    return 12.0 * x**3 * (1.0 - x**2)


def _preset_sqrtmix(x):
    x = np.abs(x)
    return (16.0 / math.pi) * x**2 * np.sqrt(np.clip(1.0 - x**2, 0.0, None))


def _preset_blend(x):
    x = np.abs(x)
    return (12.0 / 7.0) * x * (1.0 + x**2 * (1.0 - x**2))


PRESETS: dict[str, Callable] = {
    "xabs": _preset_xabs,
    "cubic": _preset_cubic,
    "sqrtmix": _preset_sqrtmix,
    "blend": _preset_blend,
}


def _tabulated(x, xs, bs):
    return np.interp(x, xs, bs)


def _scaled(x, fn, scale):
    return fn(x) / scale


def _capped(x, fn, cap):
    return np.minimum(fn(x), cap)


def integrate_01(fn, tol=QUAD_TOL, points=None, knots=None) -> float:
    """Quadrature of fn over (0, 1) to absolute tolerance tol.

    With `knots` (sorted breakpoints of a piecewise-smooth integrand, as for
    tabulated kernels) a fixed Gauss-Legendre rule is applied per segment,
    which is exact for linear-times-polynomial pieces.  Otherwise adaptive
    Gauss-Kronrod refinement is used, with optional kink hints in `points`.
    """
    if knots is not None:
        return _segmented_gauss(fn, knots, extra=points)
    kwargs = {"epsabs": tol * 1e-2, "epsrel": tol * 1e-2, "limit": 200}
    if points:
        interior = sorted(p for p in points if 0.0 < p < 1.0)
        if len(interior) > 40:  # QUADPACK cannot take arbitrarily many
            interior = interior[:: len(interior) // 40 + 1]
        kwargs["points"] = interior
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(fn, 0.0, 1.0, **kwargs)
        except Exception as exc:  # QUADPACK signals hard divergence by raising
            raise QuadratureFailure(f"quadrature failed: {exc}") from exc
    if not math.isfinite(value):
        raise QuadratureFailure("integral over (0,1) is not finite")
    if err > tol:
        raise QuadratureFailure(
            f"quadrature error {err:.3e} exceeds tolerance {tol:.1e}"
        )
    return value


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _segmented_gauss(fn, knots, extra=None) -> float:
    pts = set(float(k) for k in knots) | {0.0, 1.0}
    if extra:
        pts |= set(float(p) for p in extra if 0.0 < p < 1.0)
    edges = np.array(sorted(p for p in pts if 0.0 <= p <= 1.0))
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    x = a[:, None] + half[:, None] * (_GAUSS_NODES[None, :] + 1.0)
    vals = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
    return float(np.sum(half * (vals @ _GAUSS_WEIGHTS)))


@dataclass(frozen=True)
class CollisionKernel:
    """Normalized angular kernel with its tabulated angle-law inverse CDF."""

    evaluator: Callable
    normalization: float
    preset_name: str | None = None
    symmetry_validated: bool = True
    table_knots: np.ndarray | None = field(repr=False, default=None)
    phi_grid: np.ndarray = field(repr=False, default=None)
    beta_cdf_values: np.ndarray = field(repr=False, default=None)

    def __call__(self, x):
        return self.evaluator(x)

    def beta_cdf(self, phi):
        """CDF of the angle law on [0, pi]; nondecreasing, 0 at 0, 1 at pi."""
        return np.interp(phi, self.phi_grid, self.beta_cdf_values)

    def inverse_beta_cdf(self, u):
        return np.interp(u, self.beta_cdf_values, self.phi_grid)


def _resolve_raw(spec):
    """Turn a kernel spec into (callable, preset_name, table knots or None)."""
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise BadSpec(f"unknown kernel preset {spec!r}")
        return PRESETS[spec], spec, None
    if callable(spec):
        return spec, None, None
    if isinstance(spec, dict):
        if "preset" in spec:
            return _resolve_raw(spec["preset"])
        if "table" in spec:
            table = np.asarray(spec["table"], dtype=float)
            if table.ndim != 2 or table.shape[1] != 2:
                raise BadSpec("kernel table must be a list of [x, b(x)] pairs")
            order = np.argsort(table[:, 0])
            xs, bs = table[order, 0], table[order, 1]
            exps = spec.get("endpoint_exponents")
            if exps is not None and len(exps) != 2:
                raise BadSpec("endpoint_exponents must be [a0, a1]")
            return partial(_tabulated, xs=xs, bs=bs), None, xs
        if "function" in spec:
            return spec["function"], None, None
        raise BadSpec("kernel spec dict needs 'preset', 'table' or 'function'")
    raise BadSpec(f"cannot interpret kernel spec of type {type(spec).__name__}")


def _symmetry_residual(fn, n_grid=SYMMETRY_GRID) -> float:
    # midpoints keep clear of both endpoints, where the transform degenerates
    x = (np.arange(n_grid) + 0.5) / n_grid
    y = np.sqrt(1.0 - x**2)
    lhs = np.asarray(fn(x), dtype=float)
    rhs = np.asarray(fn(y), dtype=float) * x / y
    return float(np.max(np.abs(lhs - rhs)))


def _build_beta_table(evaluator):
    """Tabulate the angle-law CDF on [0, pi] by cumulative Simpson."""
    phi = np.linspace(0.0, math.pi, BETA_TABLE_NODES)
    density = 0.5 * np.asarray(evaluator(np.abs(np.cos(phi))), dtype=float) * np.sin(phi)
    density = np.clip(density, 0.0, None)
    cdf = integrate.cumulative_simpson(density, x=phi, initial=0.0)
    total = cdf[-1]
    if not (0.999 < total < 1.001):
        raise QuadratureFailure(
            f"angle-law mass {total:.6f} is not 1; kernel table too coarse?"
        )
    cdf = np.maximum.accumulate(cdf / total)
    cdf[0], cdf[-1] = 0.0, 1.0
    return phi, cdf


def make_kernel(spec, *, validate_symmetry: bool = True) -> CollisionKernel:
    """Build a normalized CollisionKernel from a preset name, callable or table.

    Raises NegativeKernel for sign violations, NotNormalizable when the
    integral over (0, 1) diverges, and SymmetryViolation when the exchange
    symmetry residual exceeds 1e-8 on a 1000-point grid.
    """
    raw, preset_name, knots = _resolve_raw(spec)

    probe = (np.arange(SYMMETRY_GRID) + 0.5) / SYMMETRY_GRID
    values = np.asarray(raw(probe), dtype=float)
    if np.any(values < 0.0):
        raise NegativeKernel("kernel takes negative values on (0, 1)")

    try:
        total = integrate_01(raw, knots=knots)
    except QuadratureFailure as exc:
        raise NotNormalizable(
            "kernel is not integrable on (0, 1); truncate it first"
        ) from exc
    # a nonnegative integrand whose adaptive integral undershoots its own
    # interior Riemann sum signals a non-integrable endpoint singularity
    riemann = float(np.sum(values[1:-1])) / SYMMETRY_GRID
    if not math.isfinite(total) or total > 1e12 or riemann > 1.5 * total + 0.5:
        raise NotNormalizable("kernel is not integrable on (0, 1); truncate it first")
    if total <= 0.0:
        raise NegativeKernel("kernel integrates to zero on (0, 1)")
    evaluator = raw if abs(total - 1.0) < 1e-14 else partial(_scaled, fn=raw, scale=total)

    if validate_symmetry:
        residual = _symmetry_residual(evaluator)
        if residual > SYMMETRY_TOL:
            raise SymmetryViolation(
                f"symmetry residual {residual:.3e} exceeds {SYMMETRY_TOL:.1e}"
            )

    phi_grid, cdf = _build_beta_table(evaluator)
    return CollisionKernel(
        evaluator=evaluator,
        normalization=total,
        preset_name=preset_name,
        symmetry_validated=validate_symmetry,
        table_knots=knots,
        phi_grid=phi_grid,
        beta_cdf_values=cdf,
    )


@dataclass(frozen=True)
class KernelFunctionals:
    """Spectral functionals of a kernel, all by quadrature to 1e-10."""

    lambda_b: float
    l_s_table: dict[float, float]
    f_b: float
    g_b: float

    def as_dict(self) -> dict:
        return {
            "lambda_b": self.lambda_b,
            "l_s": {str(s): v for s, v in self.l_s_table.items()},
            "f_b": self.f_b,
            "g_b": self.g_b,
        }


def _lambda_integrand(x, fn):
    return x * x * (1.0 - x * x) * fn(x)


def _ls_integrand(x, fn, s):
    return (1.0 - x * x) ** (s / 2.0) * fn(x)


def _f_integrand(x, fn):
    s2 = 1.0 - x * x
    c2 = x * x
    return (s2 * np.abs(1.5 * s2 - 0.5) + c2 * np.abs(1.5 * c2 - 0.5)) * fn(x)


def _g_integrand(x, fn):
    s2 = 1.0 - x * x
    c2 = x * x
    return (s2 * s2 * np.abs(2.5 * s2 - 1.5) + c2 * c2 * np.abs(2.5 * c2 - 1.5)) * fn(x)


def spectral_functionals(kernel: CollisionKernel, s_list=(1, 2, 3, 4)) -> KernelFunctionals:
    """Compute lambda_b, the l_s table (s=2,4 always included), f_b and g_b."""
    fn = kernel.evaluator
    knots = kernel.table_knots
    lam = -2.0 * integrate_01(partial(_lambda_integrand, fn=fn), knots=knots)
    wanted = sorted(set(float(s) for s in s_list) | {2.0, 4.0})
    if any(not 0.0 < s <= 16.0 for s in wanted):
        raise BadSpec("moment orders s must lie in (0, 16]")
    ls = {
        (int(s) if s == int(s) else s): integrate_01(
            partial(_ls_integrand, fn=fn, s=s), knots=knots
        )
        for s in wanted
    }
    # the absolute values kink where 3 sin^2 = 1 and 5 sin^2 = 3, on each side
    f_b = integrate_01(
        partial(_f_integrand, fn=fn),
        points=[math.sqrt(1.0 / 3.0), math.sqrt(2.0 / 3.0)],
        knots=knots,
    )
    g_b = integrate_01(
        partial(_g_integrand, fn=fn),
        points=[math.sqrt(2.0 / 5.0), math.sqrt(3.0 / 5.0)],
        knots=knots,
    )
    return KernelFunctionals(lambda_b=lam, l_s_table=ls, f_b=f_b, g_b=g_b)


def sample_phi(kernel: CollisionKernel, rng: np.random.Generator, size=None):
    """Draw collision angles from the angle law by inverse-CDF lookup."""
    return kernel.inverse_beta_cdf(rng.random(size))


def truncate(spec, n: int) -> tuple[CollisionKernel, float]:
    """Cap a (possibly non-summable) kernel at level n and normalize.

    Returns the kernel min(b, n)/B_n together with B_n = int min(b, n);
    simulating it at time B_n * t approximates the uncapped dynamics.
    Capping does not preserve the exchange symmetry exactly, so the
    symmetry validation is skipped for the returned kernel.
    """
    if n < 1:
        raise BadSpec("truncation level must be >= 1")
    raw, _, knots = _resolve_raw(spec)
    if knots is not None:
        # refine the table so the cap crossings become explicit nodes,
        # keeping the capped interpolant exactly piecewise linear
        xs = np.asarray(knots, dtype=float)
        bs = np.asarray(raw(xs), dtype=float)
        crossings = []
        for x0, x1, b0, b1 in zip(xs[:-1], xs[1:], bs[:-1], bs[1:]):
            if (b0 - n) * (b1 - n) < 0.0:
                crossings.append(x0 + (n - b0) * (x1 - x0) / (b1 - b0))
        xs = np.sort(np.concatenate([xs, crossings])) if crossings else xs
        capped = partial(_tabulated, xs=xs, bs=np.minimum(raw(xs), float(n)))
        b_n = integrate_01(capped, knots=xs)
        return (
            make_kernel({"table": np.column_stack([xs, capped(xs) / b_n]).tolist()},
                        validate_symmetry=False),
            b_n,
        )
    capped = partial(_capped, fn=raw, cap=float(n))
    b_n = integrate_01(capped)
    kernel = make_kernel(
        partial(_scaled, fn=capped, scale=b_n), validate_symmetry=False
    )
    return kernel, b_n
