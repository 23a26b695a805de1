"""Hard-constrained steering: terminal mean equality plus a covariance bound.

Solves the bundled benchmark as a semidefinite program, then verifies the
terminal constraints from the analytic moment formulas (never from solver
internals) and prints the 2-sigma ellipse of the terminal law.
"""

import numpy as np

from covsteer import build_lifted, check_terminal, load_problem, solve_hccs, terminal_moments

np.set_printoptions(precision=4, suppress=True)

problem = load_problem("demos/random_system.json")
lifted = build_lifted(problem.system)

solution = solve_hccs(problem, lifted)
print(f"status   : {solution.diagnostics['solver_status']}")
print(f"objective: {solution.objective:.4f} (expected total control effort)")
print(f"time     : {solution.diagnostics['solve_time']:.2f}s, "
      f"{solution.diagnostics['iterations']} interior-point iterations")

check = check_terminal(solution, problem, lifted)
print(f"terminal mean residual : {check['mean_residual']:.2e}")
print(f"covariance bound margin: {check['lmi_margin']:.2e} "
      "(min eig of Sigmad - var, must be >= -1e-6 tr Sigmad)")

mean, cov = terminal_moments(solution.policy, lifted)
lam, vec = np.linalg.eigh(cov)
print("terminal mean      :", mean)
print("terminal covariance:")
print(cov)
print("2-sigma ellipse    : semi-axes",
      np.round(2 * np.sqrt(np.maximum(lam[::-1], 0)), 4),
      f"angle {np.degrees(np.arctan2(vec[1, 1], vec[0, 1])):.1f} deg")
