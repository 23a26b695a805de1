"""Truncating the disturbance history: decision variables vs performance.

The policy at stage t may use only the gamma+1 most recent disturbances, so
small gamma means far fewer gain variables.  Feasible sets are nested in
gamma, so the optimal hard objective is non-increasing; the table shows the
trade against solve time.
"""

from covsteer import build_hccs, build_lifted, load_problem, problem_from_dict, \
    problem_to_dict, solve_hccs

problem = load_problem("demos/random_system.json")
lifted = build_lifted(problem.system)

print(f"{'gamma':>5} {'K vars':>7} {'objective':>14} {'time (s)':>9}  status")
for gamma in (0, 1, 3, 5, 10, 20, 30, 40, 50):
    data = problem_to_dict(problem)
    data["gamma"] = gamma
    sub = problem_from_dict(data)
    program = build_hccs(sub, lifted)
    k_lo, k_hi = program.name_table["K"]
    solution = solve_hccs(sub, lifted)
    status = solution.diagnostics["solver_status"]
    if status == "optimal":
        print(f"{gamma:>5} {k_hi - k_lo:>7} {solution.objective:>14.2f} "
              f"{solution.diagnostics['solve_time']:>9.2f}  {status}")
    else:
        print(f"{gamma:>5} {k_hi - k_lo:>7} {'-':>14} {'-':>9}  {status}")
