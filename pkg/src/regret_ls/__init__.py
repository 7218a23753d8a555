"""Least-squares estimation under bounded data perturbations.

Minimax-regret estimators (unstructured, regularized, and structured
variants) solved as semidefinite programs by a built-in interior-point
solver, alongside the classical baselines they are measured against, plus
perturbation oracles and Monte-Carlo benchmark scenarios.
"""

from .baselines import (
    NongenericTlsError,
    solve_ls,
    solve_reg_ls,
    solve_robust_ls,
    solve_robust_reg_ls,
    solve_structured_robust_ls,
    solve_tls,
    worst_case_residual_norm,
)
from .experiments import (
    ESTIMATORS,
    ExperimentConfig,
    ScenarioResult,
    SweepResult,
    TrialRecord,
    build_toeplitz_structure,
    convolution_matrix,
    run_scenario,
    scenario_config,
    sweep_bounds,
)
from .formulations import (
    ProblemSpec,
    RankDeficiencyError,
    RegretEstimate,
    SolverContractError,
    StructureSpec,
    TaylorCoefficients,
    assemble_lmi,
    solve_regret_ls,
    solve_regret_reg_ls,
    solve_regret_structured,
    taylor_regularized,
    taylor_structured,
    taylor_unstructured,
    worst_case_regret,
)
from .linalg import SvdConvergenceError, col_stack, col_unstack, pseudo_inverse, svd
from .perturbations import (
    PerturbationSample,
    PerturbedRankError,
    approx_regret,
    exact_regret,
    finite_difference_gradients,
    sample_perturbation,
    worst_case_perturbation,
)
from .sdp import LmiBlock, LmiSystem, SdpSolution, SolveStatus, SolverOptions, solve

__version__ = "0.1.0"

__all__ = [
    "ESTIMATORS",
    "ExperimentConfig",
    "LmiBlock",
    "LmiSystem",
    "NongenericTlsError",
    "PerturbationSample",
    "PerturbedRankError",
    "ProblemSpec",
    "RankDeficiencyError",
    "RegretEstimate",
    "ScenarioResult",
    "SdpSolution",
    "SolveStatus",
    "SolverContractError",
    "SolverOptions",
    "StructureSpec",
    "SvdConvergenceError",
    "SweepResult",
    "TaylorCoefficients",
    "TrialRecord",
    "approx_regret",
    "assemble_lmi",
    "build_toeplitz_structure",
    "col_stack",
    "col_unstack",
    "convolution_matrix",
    "exact_regret",
    "finite_difference_gradients",
    "pseudo_inverse",
    "run_scenario",
    "sample_perturbation",
    "scenario_config",
    "solve",
    "solve_ls",
    "solve_reg_ls",
    "solve_regret_ls",
    "solve_regret_reg_ls",
    "solve_regret_structured",
    "solve_robust_ls",
    "solve_robust_reg_ls",
    "solve_structured_robust_ls",
    "solve_tls",
    "svd",
    "sweep_bounds",
    "taylor_regularized",
    "taylor_structured",
    "taylor_unstructured",
    "worst_case_perturbation",
    "worst_case_regret",
    "worst_case_residual_norm",
]
