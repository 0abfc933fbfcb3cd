"""Finite-grid laboratory for norm estimates of narrow operators on L^p([0, 1])."""

__version__ = "0.1.0"

from .lp_core import (Exponent, Grid, LpVector, PartitionMap, embed, lp_norm,
                      make_equal_grid, simple_approximation)
from .operator_zoo import (OperatorMatrix, coarsening_projection, conditional_expectation,
                           gamma_shift, identity, kernel_operator, mean_operator,
                           multiply_by_sign, rank_one)
from .norm_engine import NormEstimate, brute_force_norm, min_modulus, op_norm_p
from .franchetti import CpResult, RhsEstimate, cp_constant, cp_objective, rhs_norm
from .sign_lab import (SignVector, combine_signs, find_mean_zero_sign, lemma1_witness,
                       narrowness_profile)
