"""Initial velocity laws: samplers, characteristic functions, moment tables.

Presets cover the cases exercised by the verification suite: Gaussians and
Gaussian mixtures, symmetric discrete laws (notably the six-point law on
the coordinate axes), the radial heavy-tail family with density
q / (4 pi |v|^(3+q)) outside the unit ball (finite third, infinite fourth
moment for q in (3, 4)), and sampler-only data with an empirical
characteristic function built from a frozen auxiliary sample.

Moment conventions: m_h = E|V|^h and the cubic vector is E[|V|^2 V].
Unavailable moments are stored as None (unknown) or inf (divergent),
never fabricated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import BadSpec, MomentUnavailable, NoAnalyticCf

EMPIRICAL_CF_SAMPLE = 100_000
_HEAVYTAIL_SERIES_LIMIT = 25.0


@dataclass(frozen=True)
class InitialDatum:
    """A sampleable initial law with its transform and moment table."""

    name: str
    sampler: Callable = field(repr=False)
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    covariance: np.ndarray = field(default_factory=lambda: np.eye(3))
    m2: float = 3.0
    m3: float | None = None
    m4: float | None = None
    m3_vector: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cf: Callable | None = field(default=None, repr=False)
    cf_is_exact: bool = True

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        if size is None:
            return self.sampler(rng, 1)[0]
        return self.sampler(rng, size)

    @property
    def has_cf(self) -> bool:
        return self.cf is not None

    def require_cf(self) -> Callable:
        if self.cf is None:
            raise NoAnalyticCf(f"initial datum {self.name!r} has no transform")
        return self.cf

    def require_m4(self) -> float:
        if self.m4 is None or not math.isfinite(self.m4):
            raise MomentUnavailable(
                f"fourth moment of {self.name!r} is "
                f"{'unknown' if self.m4 is None else 'infinite'}"
            )
        return self.m4

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return bool(
            np.all(np.abs(self.mean) < tol) and abs(np.trace(self.covariance) - 3.0) < tol
        )


# --- gaussian ----------------------------------------------------------------

def _gaussian_sampler(rng, size, mean, chol):
    return mean + rng.standard_normal((size, 3)) @ chol.T


def _gaussian_cf(xi, mean, cov):
    xi = np.asarray(xi, float)
    quad = np.einsum("...i,ij,...j->...", xi, cov, xi)
    return np.exp(1j * (xi @ mean) - 0.5 * quad)


def gaussian_datum(mean=(0.0, 0.0, 0.0), cov=None, name=None) -> InitialDatum:
    mean = np.asarray(mean, float)
    cov = np.eye(3) if cov is None else np.asarray(cov, float)
    if np.isscalar(cov) or cov.ndim == 0:
        cov = float(cov) * np.eye(3)
    chol = np.linalg.cholesky(cov)
    tr, mm = float(np.trace(cov)), float(mean @ mean)
    m2 = tr + mm
    m4 = m2 * m2 + 2.0 * float(np.trace(cov @ cov)) + 4.0 * float(mean @ cov @ mean)
    iso = np.allclose(cov, cov[0, 0] * np.eye(3)) and mm == 0.0
    m3 = (cov[0, 0] ** 1.5) * 8.0 * math.sqrt(2.0 / math.pi) if iso else None
    return InitialDatum(
        name=name or "gaussian",
        sampler=partial(_gaussian_sampler, mean=mean, chol=chol),
        mean=mean,
        covariance=cov,
        m2=m2,
        m3=m3,
        m4=m4,
        m3_vector=m2 * mean + 2.0 * cov @ mean,
        cf=partial(_gaussian_cf, mean=mean, cov=cov),
    )


# --- gaussian mixture --------------------------------------------------------

def _mixture_sampler(rng, size, weights, means, chols):
    idx = rng.choice(len(weights), size=size, p=weights)
    z = rng.standard_normal((size, 3))
    out = np.empty((size, 3))
    for c in range(len(weights)):
        pick = idx == c
        out[pick] = means[c] + z[pick] @ chols[c].T
    return out


def _mixture_cf(xi, weights, means, covs):
    total = 0.0 + 0.0j
    for w, m, c in zip(weights, means, covs):
        total = total + w * _gaussian_cf(xi, m, c)
    return total


def mixture_datum(components, name="mixture") -> InitialDatum:
    """components: iterable of (weight, mean, cov)."""
    weights = np.array([float(c[0]) for c in components])
    if abs(weights.sum() - 1.0) > 1e-12 or np.any(weights < 0):
        raise BadSpec("mixture weights must be nonnegative and sum to 1")
    means = [np.asarray(c[1], float) for c in components]
    covs = [np.asarray(c[2], float) * np.eye(3) if np.ndim(c[2]) == 0
            else np.asarray(c[2], float) for c in components]
    chols = [np.linalg.cholesky(c) for c in covs]
    parts = [gaussian_datum(m, c) for m, c in zip(means, covs)]
    mean = sum(w * p.mean for w, p in zip(weights, parts))
    second = sum(w * (p.covariance + np.outer(p.mean, p.mean))
                 for w, p in zip(weights, parts))
    return InitialDatum(
        name=name,
        sampler=partial(_mixture_sampler, weights=weights, means=means, chols=chols),
        mean=mean,
        covariance=second - np.outer(mean, mean),
        m2=float(np.trace(second)),
        m3=None,
        m4=float(sum(w * p.m4 for w, p in zip(weights, parts))),
        m3_vector=sum(w * p.m3_vector for w, p in zip(weights, parts)),
        cf=partial(_mixture_cf, weights=weights, means=means, covs=covs),
    )


# --- discrete laws -----------------------------------------------------------

def _discrete_sampler(rng, size, points, masses):
    if masses[0] == masses[-1] and np.ptp(masses) == 0.0:
        return points[rng.integers(0, len(masses), size=size)]
    return points[rng.choice(len(masses), size=size, p=masses)]


def _discrete_cf(xi, points, masses):
    xi = np.asarray(xi, float)
    phases = xi @ points.T  # (..., npoints)
    return np.exp(1j * phases) @ masses


def discrete_datum(points, masses, normalize=False, name="discrete") -> InitialDatum:
    points = np.asarray(points, float).reshape(-1, 3)
    masses = np.asarray(masses, float)
    if len(points) != len(masses):
        raise BadSpec("points and masses must have equal length")
    if np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-12:
        raise BadSpec("masses must be nonnegative and sum to 1")
    if normalize:
        points = points - masses @ points
        energy = float(masses @ np.einsum("ij,ij->i", points, points))
        if energy <= 0:
            raise BadSpec("cannot normalize a law concentrated at one point")
        points = points * math.sqrt(3.0 / energy)
    mean = masses @ points
    sq = np.einsum("ij,ij->i", points, points)
    return InitialDatum(
        name=name,
        sampler=partial(_discrete_sampler, points=points, masses=masses),
        mean=mean,
        covariance=np.einsum("i,ij,ik->jk", masses, points, points)
        - np.outer(mean, mean),
        m2=float(masses @ sq),
        m3=float(masses @ sq**1.5),
        m4=float(masses @ sq**2),
        m3_vector=(masses * sq) @ points,
        cf=partial(_discrete_cf, points=points, masses=masses),
    )


def sixpoint_datum() -> InitialDatum:
    """Mass 1/6 on each of the six (rescaled) coordinate directions."""
    points = np.vstack([np.eye(3), -np.eye(3)])
    return discrete_datum(points, np.full(6, 1.0 / 6.0), normalize=True,
                          name="sixpoint")


# --- radial heavy tails ------------------------------------------------------

def _heavytail_sampler(rng, size, q, scale):
    radii = rng.random(size) ** (-1.0 / q)
    direction = rng.standard_normal((size, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return scale * radii[:, None] * direction


def _heavytail_cf_scalar(x, q):
    if x == 0.0:
        return 1.0
    if x <= _HEAVYTAIL_SERIES_LIMIT:
        total = (
            1.0
            - q / (6.0 * (q - 2.0)) * x * x
            - special.gamma(1.0 - q) * math.cos(q * math.pi / 2.0) / (1.0 + q) * x**q
        )
        term_sign, m = 1.0, 2
        while True:
            term = term_sign * x ** (2 * m) / (
                math.factorial(2 * m + 1) * (2 * m - q)
            )
            total -= q * term
            if abs(term) < 1e-17:
                break
            term_sign, m = -term_sign, m + 1
        return total
    # oscillatory tail: (q/x) int_1^inf sin(x r) r^(-2-q) dr
    value, _ = integrate.quad(
        lambda r: r ** (-2.0 - q), 1.0, np.inf, weight="sin", wvar=x, limlst=200
    )
    return q / x * value


def _heavytail_cf(xi, q, scale):
    xi = np.asarray(xi, float)
    radii = scale * np.linalg.norm(xi, axis=-1)
    flat = np.array([_heavytail_cf_scalar(float(x), q) for x in np.ravel(radii)])
    return (flat.reshape(radii.shape) if radii.ndim else float(flat[0])) + 0.0j


def heavytail_datum(q: float, normalize: bool = False) -> InitialDatum:
    """Radial law with tail P(|V| > R) = R^(-q); q in (3, 4)."""
    if not 3.0 < q < 4.0:
        raise BadSpec("heavy-tail exponent q must lie in (3, 4)")
    m2_raw = q / (q - 2.0)
    scale = math.sqrt(3.0 / m2_raw) if normalize else 1.0
    return InitialDatum(
        name=f"heavytail(q={q:g})" + ("-normalized" if normalize else ""),
        sampler=partial(_heavytail_sampler, q=q, scale=scale),
        mean=np.zeros(3),
        covariance=(scale**2 * m2_raw / 3.0) * np.eye(3),
        m2=scale**2 * m2_raw,
        m3=scale**3 * q / (q - 3.0),
        m4=math.inf,
        m3_vector=np.zeros(3),
        cf=partial(_heavytail_cf, q=q, scale=scale),
    )


# --- sampler-only data -------------------------------------------------------

def _empirical_cf(xi, frozen):
    xi = np.asarray(xi, float)
    flat = xi.reshape(-1, 3)
    out = np.empty(len(flat), dtype=complex)
    step = max(1, 10_000_000 // max(len(frozen), 1))
    for start in range(0, len(flat), step):
        block = flat[start : start + step]
        out[start : start + step] = np.exp(1j * block @ frozen.T).mean(axis=1)
    return out.reshape(xi.shape[:-1]) if xi.ndim > 1 else out[0]


def sampler_datum(sampler, name="custom", empirical_cf=True,
                  aux_seed=20211205) -> InitialDatum:
    """Wrap a velocity sampler; transform and moments come from a frozen
    auxiliary sample, so the transform is flagged approximate."""
    frozen = np.asarray(
        sampler(np.random.default_rng(aux_seed), EMPIRICAL_CF_SAMPLE), float
    ).reshape(-1, 3)
    mean = frozen.mean(axis=0)
    sq = np.einsum("ij,ij->i", frozen, frozen)
    return InitialDatum(
        name=name,
        sampler=sampler,
        mean=mean,
        covariance=np.cov(frozen.T, bias=True),
        m2=float(sq.mean()),
        m3=float((sq**1.5).mean()),
        m4=float((sq**2).mean()),
        m3_vector=(sq[:, None] * frozen).mean(axis=0),
        cf=partial(_empirical_cf, frozen=frozen) if empirical_cf else None,
        cf_is_exact=False,
    )


# --- spec dispatch -----------------------------------------------------------

def make_initial_datum(spec) -> InitialDatum:
    """Build an InitialDatum from a preset name or a config dictionary."""
    if isinstance(spec, InitialDatum):
        return spec
    if isinstance(spec, str):
        if spec == "gaussian":
            return gaussian_datum()
        if spec == "sixpoint":
            return sixpoint_datum()
        raise BadSpec(f"unknown initial-datum preset {spec!r}")
    if isinstance(spec, dict):
        kind = spec.get("preset")
        if kind == "gaussian":
            return gaussian_datum(spec.get("mean", (0, 0, 0)), spec.get("cov"))
        if kind == "mixture":
            return mixture_datum(
                [(c["weight"], c["mean"], c["cov"]) for c in spec["components"]]
            )
        if kind == "sixpoint":
            return sixpoint_datum()
        if kind == "discrete":
            return discrete_datum(
                spec["points"], spec["masses"], normalize=spec.get("normalize", False)
            )
        if kind == "heavytail":
            return heavytail_datum(float(spec["q"]), spec.get("normalize", False))
        raise BadSpec(f"unknown initial-datum preset {kind!r}")
    raise BadSpec(f"cannot interpret initial-datum spec of type {type(spec).__name__}")
