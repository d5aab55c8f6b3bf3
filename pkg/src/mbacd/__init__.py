"""Minibatch randomized (accelerated) coordinate descent with arbitrary sampling."""
from .eso import (
    EsoParams,
    StepParams,
    acd_step_params,
    c_accelerated,
    c_plain,
    canonicalize_eso,
    closed_form_c,
    eso_tau_nice,
    rate_lower_bound,
    sigma_weighted,
    step_params,
    verify_eso,
)
from .sampling import SamplingLaw, Variant, build_law, draw, probability_matrix
from .solvers import acd_run, cd_run, prox_acd_run

__version__ = "0.1.0"
