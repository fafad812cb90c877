"""Rank-one tensor approximation by alternating least squares.

The solver works on dense ``float64`` arrays; CP and Tucker inputs are
densified once. Every micro step can be recorded with the descent and
projection identities it must satisfy, and :mod:`rankone_als.diagnostics`
turns a trace into convergence-rate estimates.
"""

from .als import (
    SolveResult,
    SolverConfig,
    SweepState,
    TerminationReason,
    gram_iteration_matrix,
    gram_micro_step,
    micro_step,
    projection_apply,
    rebalanced,
    solve,
    sweep,
    tucker_gamma,
)
from .diagnostics import (
    basin_angle,
    check_sharpness_r2,
    classify_mode,
    component_tan_angle,
    descent_audit,
    dominance_check,
    dominance_scores,
    estimate_rate,
    q_ratio_series,
    ratio_series,
    superlinear_bound,
    tan_angle_tensor,
)
from .errors import *  # noqa: F401,F403
from .generators import (
    gen_b_lambda,
    gen_initial_tau,
    gen_mohlenkamp,
    gen_ordering_example,
    gen_orthogonal_cp,
    gen_synthetic_order4,
)
from .oracles import (
    b_lambda_alphas,
    b_lambda_count,
    b_lambda_rate,
    b_lambda_threshold,
    best_rank_one_multistart,
    finite_diff_gradient_check,
    hosvd_start,
    jacobi_svd,
    singular_certificate,
    stationarity_residual,
)
from .tensor_io import dumps, loads, loads_rank_one, read_rank_one, read_tensor, write_tensor
from .tensors import (
    CPTensor,
    F_value,
    RankOneRep,
    TuckerTensor,
    contract_all_but_one,
    contraction_matrix,
    evaluate_rank_one,
    gradient_F,
    inner,
    objective_f,
    outer,
    raw_objective,
    to_dense,
)
from .trace import CSV_HEADER, MicroStepRecord, SweepTrace

__version__ = "0.1.0"
