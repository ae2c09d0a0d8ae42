"""Numerical laboratory for critical Riesz-type potentials.

Kernels with integrable power singularities, their potentials on radial and
cartesian samples, symmetric decreasing rearrangements, extremal families,
and exponential-integral functionals, with a scenario runner on top.
"""

from .experiment import (ExperimentReport, SCENARIOS, ScenarioConfig,
                         ScenarioRow, default_config, emit_report,
                         run_scenario, standard_configs)
from .extremal import (BallPolyBasis, ExtremalSpec, PrecisionError,
                       adams_profile, b_r_constant, ball_poly_basis,
                       extremal_spec, moment_normalize, moser_gradient,
                       moser_profile, ruf_normalize, schedule_parameters)
from .field import (LargeSmallSplit, SampledFunction, cartesian_grid,
                    dilate, from_csv, lp_norm, q_norm, radial_grid,
                    sample_cartesian, sample_radial, split_large_small,
                    to_csv, truncated_exp)
from .functional import (FunctionalReport, auto_truncation, exp_functional,
                         holder_perturbation, regularization_sandwich,
                         ruf_check)
from .kernel import (KernelSpec, QuadratureError, SharpConstants,
                     ball_volume, constant_A_g, constant_c_alpha,
                     constant_gamma, custom_kernel, eval_kernel, gradient,
                     make_kernel, perturbed, riesz, saturated,
                     sharp_constants, sphere_area, taylor_term,
                     verify_kernel_conditions)
from .potential import (MomentConditionError, PotentialField,
                        apply_potential, potential_full_lp,
                        potential_tail_lp)
from .rearrange import (DecreasingProfile, OneilReport,
                        decreasing_rearrangement, default_t_grid,
                        kernel_double_star, kernel_star, oneil_check)

__version__ = "0.1.0"

__all__ = [
    "BallPolyBasis", "DecreasingProfile", "ExperimentReport",
    "ExtremalSpec", "FunctionalReport", "KernelSpec", "LargeSmallSplit",
    "MomentConditionError", "OneilReport", "PotentialField",
    "PrecisionError", "QuadratureError", "SCENARIOS", "SampledFunction",
    "ScenarioConfig", "ScenarioRow", "SharpConstants", "adams_profile",
    "apply_potential", "auto_truncation", "b_r_constant", "ball_poly_basis",
    "ball_volume", "cartesian_grid", "constant_A_g", "constant_c_alpha",
    "constant_gamma", "custom_kernel", "decreasing_rearrangement",
    "default_config", "default_t_grid", "dilate", "emit_report",
    "eval_kernel", "exp_functional", "extremal_spec", "from_csv",
    "gradient", "holder_perturbation", "kernel_double_star", "kernel_star",
    "lp_norm", "make_kernel", "moment_normalize", "moser_gradient",
    "moser_profile", "oneil_check", "perturbed", "potential_full_lp",
    "potential_tail_lp", "q_norm", "radial_grid", "regularization_sandwich",
    "riesz", "ruf_check", "ruf_normalize", "run_scenario", "sample_cartesian",
    "sample_radial", "saturated", "schedule_parameters", "sharp_constants",
    "sphere_area", "split_large_small",
    "standard_configs", "taylor_term", "to_csv", "truncated_exp",
    "verify_kernel_conditions",
]
