"""Finite-horizon covariance steering for discrete-time Gaussian linear systems.

Solves both variants of the steering problem under affine disturbance-feedback
policies: the hard-constrained variant (terminal mean equality plus a terminal
covariance bound) as a semidefinite program, and the soft-constrained variant
(squared Wasserstein terminal cost under an effort budget) as a
difference-of-convex program via the convex-concave procedure.  A Monte-Carlo
simulator validates solved policies against the analytic moment formulas.
"""

__version__ = "0.1.0"

from .conic import ConicProgram, ConicSolution, SolverSettings, smat, svec
from .hccs import SteeringSolution, build_hccs, check_terminal, solve_hccs
from .lifting import LiftedSystem, Selector, build_lifted, joint_sqrt, selector, state_transition
from .model import (HARD, SOFT, DimensionError, GaussianSpec, ParseError, ProblemError,
                    SchemaError, SteeringProblem, SystemModel, ValidationError,
                    ValidationReport, load_problem, problem_from_dict, problem_to_dict,
                    save_problem, validate)
from .policy import (MomentTrajectory, Policy, assemble_K, assemble_L, control_input,
                     covariance_stacked, expected_effort, effort_constraint, kept_blocks,
                     load_policy, mean_trajectory, moment_trajectory, policy_from_dict,
                     policy_to_dict, save_policy, terminal_moments, truncation_mask, zeta)
from .sccs import (CcpSettings, CcpState, build_ccp_subproblem, convexify, initialize_ccp,
                   solve_sccs)
from .simulate import (MomentComparison, Rollout, SampleStats, compare_moments, monte_carlo,
                       rollout)
from .wasserstein import (ConditioningWarning, SoftObjectiveValue, gaussian_w2, nuclear_norm,
                          nuclear_term_gradient, sccs_objective)

__all__ = [
    "ConicProgram", "ConicSolution", "SolverSettings", "svec", "smat",
    "SteeringSolution", "build_hccs", "check_terminal", "solve_hccs",
    "LiftedSystem", "Selector", "build_lifted", "joint_sqrt", "selector", "state_transition",
    "HARD", "SOFT", "DimensionError", "GaussianSpec", "ParseError", "ProblemError",
    "SchemaError", "SteeringProblem", "SystemModel", "ValidationError", "ValidationReport",
    "load_problem", "problem_from_dict", "problem_to_dict", "save_problem", "validate",
    "MomentTrajectory", "Policy", "assemble_K", "assemble_L", "control_input",
    "covariance_stacked", "expected_effort", "effort_constraint", "kept_blocks",
    "load_policy", "mean_trajectory", "moment_trajectory", "policy_from_dict",
    "policy_to_dict", "save_policy", "terminal_moments", "truncation_mask", "zeta",
    "CcpSettings", "CcpState", "build_ccp_subproblem", "convexify", "initialize_ccp",
    "solve_sccs",
    "MomentComparison", "Rollout", "SampleStats", "compare_moments", "monte_carlo", "rollout",
    "ConditioningWarning", "SoftObjectiveValue", "gaussian_w2", "nuclear_norm",
    "nuclear_term_gradient", "sccs_objective",
    "__version__",
]
