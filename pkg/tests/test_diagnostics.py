"""Verification-suite drivers at reduced sample counts."""

import math

import numpy as np
import pytest

from wildsim.diagnostics import (
    cf_distance_curve,
    conservation_check,
    envelope_check,
    fit_exponential_decay,
    legendre_moment_checks,
    moment_decay_fit,
    representation_crosscheck,
    run_identity_suite,
)
from wildsim.errors import ConfigError, InsufficientSignal, PremiseFailed
from wildsim.initial import gaussian_datum, sixpoint_datum
from wildsim.kernel import make_kernel


@pytest.fixture(scope="module")
def kernel():
    return make_kernel("xabs")


@pytest.fixture(scope="module")
def sixpoint():
    return sixpoint_datum()


def small_grid():
    grid = np.array([
        [0.8, 0.0, 0.0],
        [0.0, 0.0, 1.1],
        [0.5, 0.5, 0.5],
        [-0.4, 0.8, 0.2],
        [1.2, -0.3, 0.9],
    ])
    return grid


def test_fit_recovers_synthetic_rate():
    rng = np.random.default_rng(0)
    times = np.arange(1.0, 7.0)
    truth = 2.0 * np.exp(-0.4 * times)
    ses = 0.01 * truth
    values = truth + rng.normal(0.0, ses)
    fit = fit_exponential_decay(times, values, ses, reference_rate=-0.4)
    assert fit.fitted_rate == pytest.approx(-0.4, abs=0.03)
    assert fit.fitted_log_prefactor == pytest.approx(math.log(2.0), abs=0.05)
    assert fit.used.all()


def test_fit_rejects_pure_noise():
    times = np.arange(1.0, 7.0)
    with pytest.raises(InsufficientSignal):
        fit_exponential_decay(times, np.full(6, 1e-4), np.full(6, 1e-3))


def test_identity_suite_small(kernel):
    report = run_identity_suite(kernel, [0.5, 1.0], 4000, seed=101)
    assert report.passed, [e for e in report.entries if not e.passed]
    payload = report.as_dict()
    assert payload["suite"] == "identities"
    assert payload["kernel"]["lambda_b"] == pytest.approx(-1.0 / 3.0, abs=1e-9)
    assert len(payload["entries"]) == 2 * 8
    assert payload["run_id"]


def test_identity_suite_zero_time_is_exact(kernel):
    report = run_identity_suite(kernel, [0.0], 200, seed=5)
    for entry in report.entries:
        if entry.identity.startswith("sum"):
            assert entry.mc_value == pytest.approx(entry.reference_value, abs=1e-12)
            assert entry.mc_se == 0.0
            assert entry.passed


def test_identity_suite_parallel_workers_reduce_identically(kernel):
    serial = run_identity_suite(kernel, [0.5], 2000, seed=7, workers=1)
    twice = run_identity_suite(kernel, [0.5], 2000, seed=7, workers=2)
    assert twice.passed
    # same closed-form references, independent streams
    assert serial.entries[0].reference_value == twice.entries[0].reference_value


def test_conservation_small(kernel, sixpoint):
    report = conservation_check(sixpoint, kernel, [0.5, 1.5], 5000, seed=11)
    assert report.passed, [e for e in report.entries if not e.passed]
    energies = [e for e in report.entries if e.identity == "conserved_energy"]
    assert all(e.reference_value == 3.0 for e in energies)


def test_conservation_shifted_mean(kernel):
    shifted = gaussian_datum(mean=(1.0, 0.0, 0.0))
    report = conservation_check(shifted, kernel, [1.0], 5000, seed=12)
    assert report.passed
    v1 = [e for e in report.entries if e.identity == "conserved_v1"][0]
    assert v1.reference_value == 1.0


def test_w_decay_fit_small(kernel):
    fit = moment_decay_fit(None, kernel, [1, 2, 3, 4], moment_spec="W",
                           n_samples=8000, seed=21)
    assert fit.reference_rate == pytest.approx(-1.0 / 3.0, abs=1e-9)
    assert fit.fitted_rate == pytest.approx(-1.0 / 3.0, abs=0.05)


def test_moment_decay_gaussian_has_no_signal(kernel):
    with pytest.raises(InsufficientSignal):
        moment_decay_fit(gaussian_datum(), kernel, [1, 2, 3, 4],
                         moment_spec="v1^4", n_samples=2000, seed=22)


def test_moment_decay_rejects_bad_spec(kernel, sixpoint):
    with pytest.raises(ConfigError):
        moment_decay_fit(sixpoint, kernel, [1, 2, 3, 4], moment_spec="v9^9",
                         n_samples=100, seed=1)
    with pytest.raises(ConfigError):
        moment_decay_fit(None, kernel, [1, 2], moment_spec="W",
                         n_samples=100, seed=1)


def test_cf_distance_curve_gaussian_is_zero(kernel):
    fit = cf_distance_curve(gaussian_datum(), kernel, [0.5, 1.0, 2.0, 3.0],
                            small_grid(), 500, seed=31)
    np.testing.assert_allclose(fit.values, 0.0, atol=1e-12)
    assert math.isnan(fit.fitted_rate)
    assert not fit.used.any()


def test_cf_distance_curve_sixpoint_decreases(kernel, sixpoint):
    fit = cf_distance_curve(sixpoint, kernel, [0.5, 1.5, 2.5, 3.5],
                            small_grid(), 20_000, seed=32)
    assert np.all(np.diff(fit.values) < 0.0)   # monotone within this window
    assert fit.fitted_rate <= -0.25            # at least gap-order decay


def test_crosscheck_gaussian_small_z(kernel):
    report = representation_crosscheck(gaussian_datum(), kernel, 1.0,
                                       small_grid(), 4000, seed=43)
    assert report.passed
    # conditional side is exact for the Gaussian; z is pure wild-side noise
    assert max(abs(e.z_score) for e in report.entries) < 4.0


def test_cf_distance_requires_normalized(kernel):
    with pytest.raises(ConfigError):
        cf_distance_curve(gaussian_datum(mean=(1, 0, 0)), kernel,
                          [1.0, 2.0], small_grid(), 100, seed=2)


def test_representation_crosscheck_small(kernel, sixpoint):
    report = representation_crosscheck(sixpoint, kernel, 1.0, small_grid(),
                                       20_000, seed=41)
    assert report.pass_fraction_required == 0.95
    assert report.passed, [e.z_score for e in report.entries]


def test_representation_crosscheck_zero_time(kernel, sixpoint):
    report = representation_crosscheck(sixpoint, kernel, 0.0, small_grid(),
                                       2000, seed=42)
    assert report.passed
    # at t = 0 the conditional side is exact, only the empirical side fluctuates
    for entry in report.entries:
        assert abs(entry.z_score) <= 4.0


def test_legendre_moment_checks_small(kernel):
    report = legendre_moment_checks(kernel, tree_size=3, n_theta=20_000, seed=51)
    assert report.passed, [e for e in report.entries if not e.passed]
    exact = [e for e in report.entries if e.params["tree"] == "."]
    assert all(e.mc_se == 0.0 and e.passed for e in exact)
    sizes = {len(e.params["tree"]) for e in report.entries}
    assert sizes == {1, 4, 7}  # shapes with 1..3 leaves


def test_envelope_check_gaussian(kernel):
    report = envelope_check(gaussian_datum(), math.sqrt(0.5), 0.25, kernel,
                            t=1.0, n_samples=1500, seed=61)
    assert report.passed
    assert report.entries[0].mc_value == 0.0


def test_envelope_premise_failure(kernel):
    with pytest.raises(PremiseFailed):
        envelope_check(gaussian_datum(), math.sqrt(0.5), 0.5, kernel,
                       t=1.0, n_samples=10, seed=62)
