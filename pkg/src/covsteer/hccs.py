"""Hard-constrained steering: terminal mean equality and covariance LMI.

The problem

    minimize   E[sum_t u(t)'u(t)]
    subject to E[x(T)] = mud,   var_{x(T)} <= Sigmad  (PSD order)

is solved exactly as a cone program: the terminal covariance bound holds iff
the block matrix [[Sigmad, zeta], [zeta', I]] is PSD (Schur complement of
the identity block), and zeta is affine in the gains.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import ZERO, ConicProgram, SolverSettings
from .lifting import build_lifted
from .model import HARD, ValidationError, validate
from .policy import expected_effort, terminal_moments
from .reduction import GainLayout, policy_from_name_table


@dataclass
class SteeringSolution:
    """Solver output: reconstructed policy plus verification diagnostics."""

    policy: object
    objective: float
    variant: str
    diagnostics: dict = field(default_factory=dict)


class BuildError(ValueError):
    """Program construction rejected (wrong variant or invalid problem)."""


def build_hccs(problem, lifted):
    """Assemble the hard-variant cone program.

    Decision variables are ubar, L and the unmasked K blocks; the objective
    is the expected effort through one quadratic epigraph per control stage,
    the terminal mean is a hard equality, and the covariance bound is one PSD
    block.  Identically-zero columns of zeta (singular noise) are pruned
    before forming the block, which leaves zeta @ zeta.T unchanged.
    """
    if problem.variant != HARD:
        raise BuildError(f"build_hccs needs a hard-variant problem, got {problem.variant!r}")
    report = validate(problem)
    if not report.ok:
        raise ValidationError(report)

    program = ConicProgram()
    layout = GainLayout(problem, lifted, program)
    T, m = layout.T, layout.m

    t_eff = program.add_variables("t_effort", T * m)
    for j in range(T * m):
        program.add_objective_term(t_eff[j], 1.0)
        program.add_quad_epigraph_rows(layout.effort_stage_rows(j), t_eff[j])

    program.add_constraint(ZERO, layout.mean_rows())

    zeta_map = layout.zeta_rows()
    n = layout.n
    ncols = n + T * n
    live = [c for c in range(ncols)
            if any(zeta_map[(i, c)][0] or zeta_map[(i, c)][1] != 0.0 for i in range(n))]
    d = n + len(live)
    entries = {}
    Sigmad = problem.target.covariance
    for i in range(n):
        for j in range(i + 1):
            entries[(i, j)] = float(Sigmad[i, j])
    for pos, c in enumerate(live):
        for i in range(n):
            entries[(n + pos, i)] = zeta_map[(i, c)]
        entries[(n + pos, n + pos)] = 1.0
    program.add_psd_block(entries, d)
    return program


def solve_hccs(problem, lifted=None, settings=None):
    """Solve the hard problem; statuses are returned, never raised.

    The reported objective is the expected effort recomputed from the
    reconstructed policy; terminal residuals come from the analytic moment
    formulas, never from solver internals.
    """
    if lifted is None:
        lifted = build_lifted(problem.system)
    settings = settings or SolverSettings()
    program = build_hccs(problem, lifted)
    sol = program.solve(settings)
    diagnostics = {
        "solver_status": sol.status,
        "solve_time": sol.solve_time,
        "iterations": sol.iterations,
        "variables": program.num_vars,
    }
    if sol.status != "optimal":
        return SteeringSolution(policy=None, objective=math.nan, variant=HARD,
                                diagnostics=diagnostics)
    policy = policy_from_name_table(sol.primal, program.name_table, problem)
    objective = expected_effort(policy, lifted.Sigma0, lifted.bigW)
    solution = SteeringSolution(policy=policy, objective=objective, variant=HARD,
                                diagnostics=diagnostics)
    check = check_terminal(solution, problem, lifted)
    diagnostics["solver_objective"] = sol.objective_value
    diagnostics["terminal_mean_residual"] = check["mean_residual"]
    diagnostics["terminal_lmi_margin"] = check["lmi_margin"]
    return solution


def check_terminal(solution, problem, lifted):
    """Analytic terminal residuals of a solved policy.

    mean_residual = ||E[x(T)] - mud||; lmi_margin = min eig(Sigmad - var_{x(T)}).
    """
    mean, cov = terminal_moments(solution.policy, lifted)
    mean_residual = float(np.linalg.norm(mean - problem.target.mean))
    gap = problem.target.covariance - cov
    lmi_margin = float(np.linalg.eigvalsh(0.5 * (gap + gap.T))[0])
    return {"mean_residual": mean_residual, "lmi_margin": lmi_margin}
