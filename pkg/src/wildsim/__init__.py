"""Monte Carlo simulator and verification suite for Maxwellian collision
cascades: kernels, trees, weights, rotations, samplers, diagnostics."""

from .errors import WildsimError
from .kernel import CollisionKernel, KernelFunctionals, make_kernel, sample_phi, spectral_functionals, truncate
from .tree import McKeanTree, enumerate_trees, germinate, sample_tree, split_depths, tree_probability
from .weights import WeightArray, expected_sum_closed_form, leaf_weights, psi_envelope, symmetric_function_bound, w_statistic
from .geometry import ChartAtlas, RotationArray, chart_basis, collision_frames, leaf_directions, rotation_array
from .initial import InitialDatum, make_initial_datum
from .sampler import CfEstimate, TreeSample, cf_estimate, conditional_cf, draw_tree_sample, rng_stream, sample_nu, wild_velocity
from .diagnostics import (
    DecayFit,
    IdentityReport,
    cf_distance_curve,
    conservation_check,
    envelope_check,
    legendre_moment_checks,
    moment_decay_fit,
    representation_crosscheck,
    run_identity_suite,
)

__version__ = "0.1.0"

__all__ = [
    "WildsimError",
    "CollisionKernel", "KernelFunctionals", "make_kernel", "sample_phi",
    "spectral_functionals", "truncate",
    "McKeanTree", "enumerate_trees", "germinate", "sample_tree",
    "split_depths", "tree_probability",
    "WeightArray", "expected_sum_closed_form", "leaf_weights", "psi_envelope",
    "symmetric_function_bound", "w_statistic",
    "ChartAtlas", "RotationArray", "chart_basis", "collision_frames",
    "leaf_directions", "rotation_array",
    "InitialDatum", "make_initial_datum",
    "CfEstimate", "TreeSample", "cf_estimate", "conditional_cf",
    "draw_tree_sample", "rng_stream", "sample_nu", "wild_velocity",
    "DecayFit", "IdentityReport", "cf_distance_curve", "conservation_check",
    "envelope_check", "legendre_moment_checks", "moment_decay_fit",
    "representation_crosscheck", "run_identity_suite",
]
