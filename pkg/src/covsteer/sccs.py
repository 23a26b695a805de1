"""Soft-constrained steering via the convex-concave procedure.

The soft objective is a difference of convex functions of (ubar, zeta):
a convex quadratic part minus twice the nuclear norm of sqrt(Sigmad) @ zeta,
under the convex effort budget.  Each CCP iteration linearizes the concave
part at the current iterate and solves the convex surrogate

    min  ||P f(ubar) - mud||^2 + ||xi||_F^2 + tr(Sigmad) - 2 <G_k, xi>
    s.t. xi = zeta(L, K),   effort(ubar, L, K) <= rho^2,

tracking the true objective f_k at every iterate.  With the exact gradient
the surrogate touches the true objective at the iterate, so f_k is
non-increasing up to solver tolerance and the loop stops once successive
values differ by at most epsilon.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .conic import SOC, ZERO, ConicProgram, SolverSettings
from .hccs import BuildError, SteeringSolution, solve_hccs
from .lifting import build_lifted
from .model import HARD, SOFT, SteeringProblem, ValidationError, validate
from .policy import Policy, expected_effort, terminal_moments
from .policy import zeta as zeta_of
from .reduction import GainLayout, min_norm_mean_feedforward, policy_from_name_table
from .wasserstein import nuclear_term_gradient, sccs_objective


@dataclass
class CcpSettings:
    epsilon: float = 1e-3
    max_ccp_iters: int = 200
    init_strategy: str = "mean_feedforward"
    conic: SolverSettings = field(default_factory=SolverSettings)


@dataclass
class CcpState:
    """One CCP iterate: counter, policy, its zeta factor and true objective."""

    k: int
    policy: Policy
    zeta: np.ndarray
    f: float
    history: list = field(default_factory=list)


def _scale_to_budget(policy, problem, lifted):
    """Shrink a policy uniformly until the effort budget holds."""
    effort = expected_effort(policy, lifted.Sigma0, lifted.bigW)
    budget = float(problem.rho) ** 2
    if effort <= budget:
        return policy
    scale = 0.0 if budget == 0.0 else math.sqrt(budget / effort) * (1.0 - 1e-9)
    return Policy(ubar=scale * policy.ubar, L=scale * policy.L, K=scale * policy.K,
                  gamma=policy.gamma)


def initialize_ccp(problem, lifted, strategy="mean_feedforward"):
    """Initial feasible policy for the CCP loop.

    ``zero``: all parameters zero.  ``mean_feedforward`` (default): gains
    zero, ubar the minimum-norm mean-steering solution, scaled down to the
    budget if needed.  ``hard_warm_start``: solve the hard problem first and
    scale its policy to the budget; falls back to mean_feedforward if the
    hard problem is not solvable.
    """
    if problem.variant != SOFT:
        raise BuildError(f"initialize_ccp needs a soft-variant problem, got {problem.variant!r}")
    sys_ = problem.system
    if strategy == "zero":
        return Policy.zero(sys_.n, sys_.m, sys_.T, problem.gamma)
    if strategy == "mean_feedforward":
        ubar = min_norm_mean_feedforward(problem, lifted)
        policy = Policy(ubar=ubar, L=np.zeros((sys_.T, sys_.m, sys_.n)),
                        K=np.zeros((max(sys_.T - 1, 0), max(sys_.T - 1, 0), sys_.m, sys_.n)),
                        gamma=problem.gamma)
        return _scale_to_budget(policy, problem, lifted)
    if strategy == "hard_warm_start":
        hard = SteeringProblem(system=problem.system, target=problem.target,
                               rho=problem.rho, gamma=problem.gamma, variant=HARD)
        solution = solve_hccs(hard, lifted)
        if solution.policy is None:
            warnings.warn("hard warm start failed "
                          f"({solution.diagnostics.get('solver_status')}); "
                          "falling back to mean_feedforward", stacklevel=2)
            return initialize_ccp(problem, lifted, "mean_feedforward")
        return _scale_to_budget(solution.policy, problem, lifted)
    raise ValueError(f"unknown initialization strategy {strategy!r}")


def convexify(zeta_k, Sigmad, eig_floor=1e-10):
    """Gradient of the nuclear-norm term at the current iterate.

    The surrogate objective then replaces -2||sqrt(Sigmad) zeta||_* by the
    linear term -2 <G_k, zeta>; the dropped constant offset vanishes for the
    exact gradient, so the surrogate equals the true objective at zeta_k.
    """
    return nuclear_term_gradient(zeta_k, Sigmad, eig_floor=eig_floor)


def build_ccp_subproblem(problem, lifted, G_k):
    """Convex surrogate subproblem as a cone program.

    Variables are the gains plus an explicit matrix variable xi tied to
    zeta(L, K) by equalities; the budget is the second-order-cone ball
    ||(ubar, Lmat R0, Kmat RW)|| <= rho.
    """
    if problem.variant != SOFT:
        raise BuildError(f"build_ccp_subproblem needs a soft-variant problem, "
                         f"got {problem.variant!r}")
    report = validate(problem)
    if not report.ok:
        raise ValidationError(report)

    program = ConicProgram()
    layout = GainLayout(problem, lifted, program)
    n, m, T = layout.n, layout.m, layout.T
    ncols = n + T * n
    G_k = np.asarray(G_k, dtype=float)
    if G_k.shape != (n, ncols):
        raise ValueError(f"G_k must have shape ({n}, {ncols}), got {G_k.shape}")

    iXi = program.add_variables("xi", n * ncols).reshape(n, ncols)
    t_mean = program.add_variables("t_mean", 1)[0]
    t_xi = program.add_variables("t_xi", 1)[0]

    # xi = zeta(L, K)
    zeta_map = layout.zeta_rows()
    eq_rows = []
    for (i, c), (coeffs, const) in sorted(zeta_map.items()):
        row = dict(coeffs)
        row[int(iXi[i, c])] = row.get(int(iXi[i, c]), 0.0) - 1.0
        eq_rows.append((row, const))
    program.add_constraint(ZERO, eq_rows)

    program.add_quad_epigraph_rows(layout.mean_rows(), t_mean)
    program.add_quad_epigraph([int(v) for v in iXi.reshape(-1)], t_xi)

    # effort budget as a norm ball of radius rho
    ball = [({}, float(problem.rho))]
    for j in range(T * m):
        ball.extend(layout.effort_stage_rows(j))
    program.add_constraint(SOC, ball)

    program.add_objective_term(t_mean, 1.0)
    program.add_objective_term(t_xi, 1.0)
    for i in range(n):
        for c in range(ncols):
            if G_k[i, c] != 0.0:
                program.add_objective_term(int(iXi[i, c]), -2.0 * float(G_k[i, c]))
    program.objective_constant = float(np.trace(problem.target.covariance))
    return program


def _true_objective(policy, problem, lifted):
    mean, _ = terminal_moments(policy, lifted)
    z = zeta_of(policy, lifted)
    value = sccs_objective(mean, z, problem.target.mean, problem.target.covariance)
    return value.total, z


def solve_sccs(problem, lifted=None, settings=None):
    """Run the CCP loop and return the best iterate by true objective.

    Terminates when |f_k - f_{k-1}| <= epsilon or at the iteration cap; a
    failed subproblem aborts with the last good iterate and a degraded
    status flag in the diagnostics.
    """
    if lifted is None:
        lifted = build_lifted(problem.system)
    settings = settings or CcpSettings()

    policy = initialize_ccp(problem, lifted, settings.init_strategy)
    f, z = _true_objective(policy, problem, lifted)
    state = CcpState(k=0, policy=policy, zeta=z, f=f,
                     history=[{"k": 0, "f": f, "solve_time": 0.0}])
    best_policy, best_f = policy, f
    degraded = False
    status = "optimal"

    for k in range(1, settings.max_ccp_iters + 1):
        G_k = convexify(state.zeta, problem.target.covariance)
        program = build_ccp_subproblem(problem, lifted, G_k)
        sol = program.solve(settings.conic)
        if sol.status != "optimal":
            degraded = True
            status = sol.status
            break
        policy = policy_from_name_table(sol.primal, program.name_table, problem)
        f, z = _true_objective(policy, problem, lifted)
        state = CcpState(k=k, policy=policy, zeta=z, f=f,
                         history=state.history + [{"k": k, "f": f,
                                                   "solve_time": sol.solve_time}])
        if f < best_f:
            best_policy, best_f = policy, f
        if abs(f - state.history[-2]["f"]) <= settings.epsilon:
            break

    diagnostics = {
        "solver_status": status if not degraded else f"degraded ({status})",
        "degraded": degraded,
        "ccp_iterations": state.k,
        "ccp_history": state.history,
        "solve_time": sum(h["solve_time"] for h in state.history),
        "iterations": state.k,
        "effort": expected_effort(best_policy, lifted.Sigma0, lifted.bigW),
    }
    return SteeringSolution(policy=best_policy, objective=best_f, variant=SOFT,
                            diagnostics=diagnostics)
