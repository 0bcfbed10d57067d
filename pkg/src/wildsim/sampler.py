"""Sampling of collision cascades and of the solution they represent.

Two equivalent views of the same random object are implemented.

TreeSample path: grow the leaf arrays incrementally.  A germination of
slot k at angles (phi, theta) replaces weight w_k by w_k cos(phi),
appends w_k sin(phi), replaces rotation Q_k by Q_k left(phi, theta) and
appends Q_k right(phi, theta).  After nu - 1 germinations the multiset of
(weight, rotation) pairs has the law of the recursively built arrays of a
chain-sampled tree; every statistic computed downstream is symmetric in
the leaf index, which is what makes the slot/append order legal.

Velocity path: the same germination record replayed backwards folds i.i.d.
initial velocities through pairwise collisions (children created last are
merged first, so each merge sees fully collapsed subtrees) and returns one
draw from the solution at time t.

The characteristic-function estimator averages exp(i rho S) with
S = sum_j w_j psi_j . V_j, or its conditional expectation given the tree,
angles and rotations (the default when the initial transform is available,
since conditioning never increases variance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TimeTooLarge
from .geometry import ATLAS, RotationArray, left_frame, right_frame
from .initial import InitialDatum, make_initial_datum  # noqa: F401  (module API)
from .kernel import CollisionKernel
from .weights import WeightArray

DEFAULT_NU_CAP = 1_000_000
TWO_PI = 2.0 * math.pi


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for (seed, stream key); reproducible and
    independent across keys, so worker streams never overlap."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def _check_time(t: float, n_max: int) -> None:
    if t < 0.0:
        raise TimeTooLarge("time must be nonnegative")
    if math.exp(t) > n_max:
        raise TimeTooLarge(
            f"expected cascade size exp({t:g}) exceeds the cap {n_max}"
        )


def sample_nu(t: float, rng: np.random.Generator, n_max: int = DEFAULT_NU_CAP) -> int:
    """Cascade size: P[nu = n] = e^-t (1 - e^-t)^(n-1)."""
    _check_time(t, n_max)
    if t == 0.0:
        return 1
    log_fail = math.log1p(-math.exp(-t))
    u = rng.random()
    nu = 1 + int(math.log(u if u > 0.0 else 5e-324) / log_fail)
    if nu > n_max:
        raise TimeTooLarge(f"drew cascade size {nu} above the cap {n_max}")
    return nu


def sample_nu_batch(t, rng, size, n_max: int = DEFAULT_NU_CAP) -> np.ndarray:
    _check_time(t, n_max)
    if t == 0.0:
        return np.ones(size, dtype=np.int64)
    log_fail = math.log1p(-math.exp(-t))
    u = np.clip(rng.random(size), 5e-324, None)
    nus = 1 + (np.log(u) / log_fail).astype(np.int64)
    if np.any(nus > n_max):
        raise TimeTooLarge(f"drew cascade size above the cap {n_max}")
    return nus


@dataclass(frozen=True)
class TreeSample:
    """One draw of (size, leaf weights, leaf rotations) at parameter t."""

    nu: int
    pi: WeightArray
    rotations: RotationArray
    phis: np.ndarray
    thetas: np.ndarray
    t: float
    rng_seed: int | None = None

    def leaf_directions(self, u) -> np.ndarray:
        """Unit leaf directions for the probe direction u."""
        return self.rotations.third_columns() @ ATLAS.frame_for(u).T


def _germination_draws(kernel, rng, steps):
    phis = kernel.inverse_beta_cdf(rng.random(steps))
    thetas = rng.uniform(0.0, TWO_PI, steps)
    slots = rng.random(steps)
    return phis, thetas, slots


def draw_tree_sample(
    t: float,
    kernel: CollisionKernel,
    rng: np.random.Generator,
    n_max: int = DEFAULT_NU_CAP,
    nu: int | None = None,
) -> TreeSample:
    """Draw a TreeSample by incremental germination (nu overrides the size
    draw, for conditional studies)."""
    if nu is None:
        nu = sample_nu(t, rng, n_max)
    phis, thetas, slots = _germination_draws(kernel, rng, nu - 1)
    pis = [1.0]
    rots = [np.eye(3)]
    if nu > 1:
        lefts = left_frame(phis, thetas)
        rights = right_frame(phis, thetas)
        cos_p = np.cos(phis)
        sin_p = np.sin(phis)
        for i in range(nu - 1):
            k = int(slots[i] * (i + 1))
            w = pis[k]
            pis[k] = w * cos_p[i]
            pis.append(w * sin_p[i])
            q = rots[k]
            rots[k] = q @ lefts[i]
            rots.append(q @ rights[i])
    return TreeSample(
        nu=nu,
        pi=WeightArray(values=np.array(pis), order=1),
        rotations=RotationArray(rotations=np.array(rots)),
        phis=phis,
        thetas=thetas,
        t=t,
    )


def conditional_cf(sample: TreeSample, mu0: InitialDatum, rho: float, u) -> complex:
    """Transform of the conditional law given the full cascade data:
    the product of initial transforms at rho * w_j * psi_j(u)."""
    cf = mu0.require_cf()
    psi = sample.leaf_directions(u)
    args = rho * sample.pi.values[:, None] * psi
    return complex(np.prod(cf(args)))


def conditional_second_moment(sample: TreeSample, mu0: InitialDatum, u) -> float:
    """sum_j w_j^2 E[(psi_j . V)^2], the h = 2 conditional moment bound."""
    psi = sample.leaf_directions(u)
    quad = np.einsum("ji,ik,jk->j", psi, mu0.covariance, psi) + (psi @ mu0.mean) ** 2
    return float(np.sum(sample.pi.values**2 * quad))


@dataclass(frozen=True)
class CfEstimate:
    """Monte Carlo estimate of the solution's transform at one frequency."""

    value: complex
    std_error: float
    se_real: float
    se_imag: float
    n_samples: int
    xi: np.ndarray
    t: float
    estimator: str


def _mean_and_se(values: np.ndarray) -> tuple[complex, float, float]:
    mean = complex(values.mean())
    n = len(values)
    if n < 2:
        return mean, 0.0, 0.0
    se_re = float(values.real.std(ddof=1) / math.sqrt(n))
    se_im = float(values.imag.std(ddof=1) / math.sqrt(n))
    return mean, se_re, se_im


def cf_estimate(
    xi,
    t: float,
    n_samples: int,
    mu0: InitialDatum,
    kernel: CollisionKernel,
    rng: np.random.Generator,
    estimator: str = "raoblackwell",
    n_max: int = DEFAULT_NU_CAP,
) -> CfEstimate:
    """Estimate the transform of the solution at frequency xi and time t.

    'raoblackwell' averages the conditional transform (needs mu0.cf);
    'raw' averages exp(i rho S) over velocity draws attached to the leaves.
    """
    xi = np.asarray(xi, float)
    rho = float(np.linalg.norm(xi))
    if rho == 0.0:
        return CfEstimate(1.0 + 0.0j, 0.0, 0.0, 0.0, n_samples, xi, t, "exact")
    if estimator not in ("raoblackwell", "raw"):
        raise ValueError(f"unknown estimator {estimator!r}")
    u = xi / rho
    basis = ATLAS.frame_for(u)
    if estimator == "raoblackwell":
        cf = mu0.require_cf()
    values = np.empty(n_samples, dtype=complex)
    for i in range(n_samples):
        sample = draw_tree_sample(t, kernel, rng, n_max)
        psi = sample.rotations.third_columns() @ basis.T
        if estimator == "raoblackwell":
            args = rho * sample.pi.values[:, None] * psi
            values[i] = np.prod(cf(args))
        else:
            velocities = mu0.sampler(rng, sample.nu)
            s = float(np.sum(sample.pi.values * np.einsum("ji,ji->j", psi, velocities)))
            values[i] = complex(math.cos(rho * s), math.sin(rho * s))
    mean, se_re, se_im = _mean_and_se(values)
    return CfEstimate(
        value=mean,
        std_error=math.hypot(se_re, se_im),
        se_real=se_re,
        se_imag=se_im,
        n_samples=n_samples,
        xi=xi,
        t=t,
        estimator=estimator,
    )


# --- the velocity cascade -----------------------------------------------------

def collide(v, w, phi: float, theta: float):
    """Post-collisional pair for incoming velocities (v, w).

    The deflection direction is built from the unit relative velocity and a
    deterministic orthonormal completion; theta is uniform, so the law of
    the outcome does not depend on the completion choice.  Momentum and
    kinetic energy are conserved exactly up to roundoff.
    """
    vx, vy, vz = v
    wx, wy, wz = w
    dx, dy, dz = wx - vx, wy - vy, wz - vz
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    if norm == 0.0:  # identical velocities: the collision is the identity
        return (vx, vy, vz), (wx, wy, wz)
    ux, uy, uz = dx / norm, dy / norm, dz / norm

    # complete against the axis least aligned with the relative direction
    ax, ay, az = abs(ux), abs(uy), abs(uz)
    if ax <= ay and ax <= az:
        bx, by, bz = 1.0 - ux * ux, -ux * uy, -ux * uz
    elif ay <= az:
        bx, by, bz = -uy * ux, 1.0 - uy * uy, -uy * uz
    else:
        bx, by, bz = -uz * ux, -uz * uy, 1.0 - uz * uz
    bn = math.sqrt(bx * bx + by * by + bz * bz)
    bx, by, bz = bx / bn, by / bn, bz / bn
    cx = uy * bz - uz * by
    cy = uz * bx - ux * bz
    cz = ux * by - uy * bx

    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    ox = sp * (ct * bx + st * cx) + cp * ux
    oy = sp * (ct * by + st * cy) + cp * uy
    oz = sp * (ct * bz + st * cz) + cp * uz

    g = norm * cp  # (w - v) . omega
    return (
        (vx + g * ox, vy + g * oy, vz + g * oz),
        (wx - g * ox, wy - g * oy, wz - g * oz),
    )


def _cascade_value(nu, velocities, phis, thetas, slots):
    """Fold leaf velocities through the germination record, replayed
    backwards so children merge before their parents.

    Same collision rule as collide(), inlined with precomputed trigs; the
    agreement of the two paths is covered by the sampler tests.
    """
    values = velocities.tolist()
    sin_p = np.sin(phis).tolist()
    cos_p = np.cos(phis).tolist()
    sin_t = np.sin(thetas).tolist()
    cos_t = np.cos(thetas).tolist()
    sqrt = math.sqrt
    for s in range(nu - 2, -1, -1):
        k = int(slots[s] * (s + 1))
        vx, vy, vz = values[k]
        wx, wy, wz = values[s + 1]
        dx, dy, dz = wx - vx, wy - vy, wz - vz
        norm = sqrt(dx * dx + dy * dy + dz * dz)
        if norm == 0.0:
            continue
        ux, uy, uz = dx / norm, dy / norm, dz / norm
        ax, ay, az = abs(ux), abs(uy), abs(uz)
        if ax <= ay and ax <= az:
            bx, by, bz = 1.0 - ux * ux, -ux * uy, -ux * uz
        elif ay <= az:
            bx, by, bz = -uy * ux, 1.0 - uy * uy, -uy * uz
        else:
            bx, by, bz = -uz * ux, -uz * uy, 1.0 - uz * uz
        bn = sqrt(bx * bx + by * by + bz * bz)
        bx, by, bz = bx / bn, by / bn, bz / bn
        cx = uy * bz - uz * by
        cy = uz * bx - ux * bz
        cz = ux * by - uy * bx
        sp, cp = sin_p[s], cos_p[s]
        st, ct = sin_t[s], cos_t[s]
        g = norm * cp
        values[k] = (
            vx + g * (sp * (ct * bx + st * cx) + cp * ux),
            vy + g * (sp * (ct * by + st * cy) + cp * uy),
            vz + g * (sp * (ct * bz + st * cz) + cp * uz),
        )
    return values[0]


def wild_velocity(
    t: float,
    mu0: InitialDatum,
    kernel: CollisionKernel,
    rng: np.random.Generator,
    n_max: int = DEFAULT_NU_CAP,
) -> np.ndarray:
    """One velocity draw from the solution at time t."""
    nu = sample_nu(t, rng, n_max)
    velocities = mu0.sampler(rng, nu)
    if nu == 1:
        return velocities[0]
    phis, thetas, slots = _germination_draws(kernel, rng, nu - 1)
    return np.array(_cascade_value(nu, velocities, phis, thetas, slots))


def wild_velocity_batch(
    t: float,
    mu0: InitialDatum,
    kernel: CollisionKernel,
    rng: np.random.Generator,
    size: int,
    n_max: int = DEFAULT_NU_CAP,
) -> np.ndarray:
    """size independent draws from the solution at time t, shape (size, 3)."""
    out = np.empty((size, 3))
    for i in range(size):
        out[i] = wild_velocity(t, mu0, kernel, rng, n_max)
    return out


# --- weight-only cascades (identity statistics) --------------------------------

def weight_statistic_sums(
    t: float,
    kernel: CollisionKernel,
    rng: np.random.Generator,
    n_samples: int,
    s_powers: tuple = (1, 2, 3, 4),
    with_zeta_eta: bool = True,
    a_star: float | None = None,
    n_max: int = DEFAULT_NU_CAP,
) -> dict[str, np.ndarray]:
    """Accumulate sums and squared sums of the per-cascade statistics
    sum_j |w_j|^s, sum_j w_j^2 |zeta_j|, sum_j |w_j^3 eta_j| and W.

    Only first and second moments are kept, so partial results from
    independent workers combine by plain addition.
    """
    keys = [f"abs_pow_{s}" for s in s_powers] + (
        ["zeta", "eta"] if with_zeta_eta else []
    ) + ["W"]
    sums = {key: np.zeros(2) for key in keys}
    if a_star is not None:
        sums["W_tail"] = np.zeros(2)
    sums["count"] = np.array(float(n_samples))

    for _ in range(n_samples):
        nu = sample_nu(t, rng, n_max)
        if nu == 1:
            stats = {key: 1.0 for key in keys}
        else:
            phis = kernel.inverse_beta_cdf(rng.random(nu - 1))
            slots = rng.random(nu - 1)
            cos_p = np.cos(phis)
            sin_p = np.sin(phis)
            pis = [1.0]
            zetas = [1.0] if with_zeta_eta else None
            etas = [1.0] if with_zeta_eta else None
            for i in range(nu - 1):
                k = int(slots[i] * (i + 1))
                c, s = cos_p[i], sin_p[i]
                w = pis[k]
                pis[k] = w * c
                pis.append(w * s)
                if with_zeta_eta:
                    c2, s2 = c * c, s * s
                    z = zetas[k]
                    zetas[k] = z * (1.5 * c2 - 0.5)
                    zetas.append(z * (1.5 * s2 - 0.5))
                    e = etas[k]
                    etas[k] = e * (2.5 * c2 - 1.5) * c
                    etas.append(e * (2.5 * s2 - 1.5) * s)
            absolute = np.abs(pis)
            stats = {f"abs_pow_{s}": float(np.sum(absolute**s)) for s in s_powers}
            sq = absolute * absolute
            stats["W"] = float(np.sum(sq * sq))
            if with_zeta_eta:
                stats["zeta"] = float(np.sum(sq * np.abs(zetas)))
                stats["eta"] = float(np.sum(absolute**3 * np.abs(etas)))
        for key in keys:
            v = stats[key]
            sums[key] += (v, v * v)
        if a_star is not None:
            hit = 1.0 if stats["W"] >= a_star else 0.0
            sums["W_tail"] += (hit, hit)
    return sums


def tree_sample_pool(
    t: float,
    kernel: CollisionKernel,
    rng: np.random.Generator,
    n_samples: int,
    n_max: int = DEFAULT_NU_CAP,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Reduced cascade draws (weights, rotation third columns) for
    transform estimation over frequency grids."""
    pool = []
    for _ in range(n_samples):
        sample = draw_tree_sample(t, kernel, rng, n_max)
        pool.append((sample.pi.values, sample.rotations.third_columns()))
    return pool
