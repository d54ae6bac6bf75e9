"""Squared-variable reformulations of PSD-constrained problems.

Certifiers for first- and second-order necessary conditions, direction
lifts between formulations, second-order solvers and the nuclear-norm
application.
"""
from .errors import *  # noqa: F401,F403
from .certify import (CertReport, Tolerances, bc_form, certify_bc_1c, certify_bc_2nc,
                      certify_dss, certify_dss_sym, certify_nsdp_1c,
                      certify_nsdp_2nc, certify_ssv, certify_ssv_sym,
                      check_eigenvalue_condition, check_strict_complementarity,
                      recover_multiplier)
from .lift import construct_delta, construct_delta_sym, factor_any, lemma_t2_gap
from .problems import (BcProblem, NsdpProblem, make_example_2_1, make_example_2_2,
                       make_example_3_1, make_example_b_1, make_least_squares,
                       make_nnm_bc, make_quadratic_hadamard, make_quadratic_square)
from .nucnorm import (NnmProblem, certify_nnm_1p, lift_nnm_1p, make_nnm_denoise,
                      make_nnm_least_squares, nuclear_norm_block, project_nnm,
                      prox_grad_nnm_oracle, sensing_instance, solve_nnm_dss)
from .solve import SolveOptions, SolveTrace, sample_local_check, solve_dss, solve_dss_sym, solve_ssv_auglag

__version__ = "0.1.0"
