"""Command-line front end: solve, sweep and simulate steering problems.

Artifacts are plain CSV/JSON files written to --out; every run also writes a
manifest listing each output with a content checksum.  Exit codes: 0 success,
2 bad input (parse/schema/dimension/validation/mismatch), 3 infeasible,
4 solver failure, 5 simulation thresholds exceeded.
"""

import argparse
import concurrent.futures
import datetime
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conic import SolverSettings
from .hccs import solve_hccs
from .lifting import build_lifted
from .model import HARD, SOFT, ProblemError, load_problem, problem_to_dict
from .policy import moment_trajectory, policy_from_dict, policy_to_dict
from .sccs import CcpSettings, solve_sccs
from .simulate import compare_moments, monte_carlo

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4
EXIT_THRESHOLD = 5


@dataclass
class RunManifest:
    """Record of one CLI run: inputs, settings and checksummed outputs."""

    command: str
    input: str
    settings: dict
    out_dir: str
    started: str
    finished: str = ""
    versions: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)


class _Writer:
    """Single funnel for all file writes; records checksums for the manifest."""

    def __init__(self, out_dir, manifest):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = manifest

    def _register(self, path):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.manifest.outputs.append({"path": path.name, "sha256": digest})

    def write_text(self, name, text):
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        self._register(path)
        return path

    def write_json(self, name, data):
        return self.write_text(name, json.dumps(data, indent=2, default=_jsonable) + "\n")

    def write_csv(self, name, header, rows):
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def finish(self):
        self.manifest.finished = _now()
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self.manifest), indent=2) + "\n", encoding="utf-8")


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _versions():
    import importlib.metadata

    import scipy
    try:
        clarabel_version = importlib.metadata.version("clarabel")
    except importlib.metadata.PackageNotFoundError:
        clarabel_version = "unknown"
    return {"covsteer": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "clarabel": clarabel_version,
            "python": sys.version.split()[0]}


def _with_overrides(problem, args):
    data = problem_to_dict(problem)
    if getattr(args, "variant", None):
        data["variant"] = args.variant
    if getattr(args, "gamma", None) is not None:
        data["gamma"] = args.gamma
    if getattr(args, "rho", None) is not None:
        data["rho"] = args.rho
    from .model import problem_from_dict
    return problem_from_dict(data)


def _solver_settings(args):
    return SolverSettings(feas_tol=args.feas_tol, gap_tol=args.gap_tol)


def _moment_rows(moments):
    stages, n = moments.means.shape
    rows = []
    for t in range(stages):
        row = [t] + [float(v) for v in moments.means[t]]
        row += [float(v) for v in moments.covariances[t].reshape(-1)]
        rows.append(row)
    header = ["t"] + [f"mean_{i}" for i in range(n)] \
        + [f"cov_{i}_{j}" for i in range(n) for j in range(n)]
    return header, rows


def _ellipse_rows(moments):
    """2-sigma confidence ellipses: semi-axes 2*sqrt(eigenvalue), leading angle."""
    rows = []
    for t in range(moments.means.shape[0]):
        lam, vec = np.linalg.eigh(moments.covariances[t])
        # leading axis first
        a1, a2 = 2.0 * math.sqrt(max(lam[1], 0.0)), 2.0 * math.sqrt(max(lam[0], 0.0))
        angle = math.atan2(vec[1, 1], vec[0, 1])
        rows.append([t, float(moments.means[t][0]), float(moments.means[t][1]),
                     a1, a2, angle])
    header = ["t", "center_x", "center_y", "axis_1", "axis_2", "angle_rad"]
    return header, rows


def _solution_doc(problem, solution):
    doc = {"variant": solution.variant, "objective": solution.objective,
           "diagnostics": solution.diagnostics, "problem": problem_to_dict(problem)}
    if solution.policy is not None:
        doc["policy"] = policy_to_dict(solution.policy)
    return doc


def _solve_one(problem, variant, args):
    solver = _solver_settings(args)
    if variant == HARD:
        return solve_hccs(problem, settings=solver)
    ccp = CcpSettings(epsilon=args.epsilon, conic=solver)
    return solve_sccs(problem, settings=ccp)


def cmd_solve(args):
    problem = _with_overrides(load_problem(args.problem), args)
    manifest = RunManifest(command="solve", input=str(args.problem),
                           settings={"variant": problem.variant, "gamma": problem.gamma,
                                     "rho": problem.rho, "feas_tol": args.feas_tol,
                                     "gap_tol": args.gap_tol, "epsilon": args.epsilon},
                           out_dir=str(args.out), started=_now(), versions=_versions())
    solution = _solve_one(problem, problem.variant, args)
    status = solution.diagnostics.get("solver_status", "")

    writer = _Writer(args.out, manifest)
    writer.write_json("solution.json", _solution_doc(problem, solution))
    if solution.policy is not None:
        lifted = build_lifted(problem.system)
        moments = moment_trajectory(solution.policy, lifted)
        writer.write_csv("moments.csv", *_moment_rows(moments))
        if problem.system.n == 2:
            writer.write_csv("ellipse.csv", *_ellipse_rows(moments))
        if solution.variant == SOFT:
            history = solution.diagnostics.get("ccp_history", [])
            writer.write_csv("ccp_history.csv", ["iteration", "objective"],
                             [[h["k"], h["f"]] for h in history])
    writer.finish()

    print(f"variant={solution.variant} status={status} "
          f"objective={solution.objective:.6f} "
          f"solve_time={solution.diagnostics.get('solve_time', float('nan')):.3f}s")
    if solution.policy is None:
        return EXIT_INFEASIBLE if status == "infeasible" else EXIT_SOLVER
    if solution.diagnostics.get("degraded"):
        return EXIT_SOLVER
    return EXIT_OK


def _sweep_job(problem, gamma, variants, args):
    from .model import problem_from_dict
    data = problem_to_dict(problem)
    data["gamma"] = gamma
    out = {"gamma": gamma}
    for variant in variants:
        data["variant"] = variant
        sub = problem_from_dict(data)
        solution = _solve_one(sub, variant, args)
        out[variant] = solution
    return out


def cmd_sweep(args):
    problem = load_problem(args.problem)
    gammas = [int(g) for g in args.gammas.split(",")] if args.gammas else [problem.gamma]
    for g in gammas:
        if not (0 <= g <= problem.system.T):
            raise ProblemError(f"gamma {g} outside [0, {problem.system.T}]")
    variants = [HARD, SOFT] if args.variant == "both" else [args.variant]

    manifest = RunManifest(command="sweep", input=str(args.problem),
                           settings={"gammas": gammas, "variant": args.variant,
                                     "rho": problem.rho, "jobs": args.jobs},
                           out_dir=str(args.out), started=_now(), versions=_versions())

    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(args.jobs, 1)) as pool:
        futures = {pool.submit(_sweep_job, problem, g, variants, args): g for g in gammas}
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()

    header = ["gamma"]
    for variant in variants:
        header += [f"{variant}_objective", f"{variant}_time", f"{variant}_status"]
    rows = []
    any_failed = False
    infeasible_seen = False
    for g in gammas:
        row = [g]
        for variant in variants:
            sol = results[g][variant]
            status = sol.diagnostics.get("solver_status", "")
            if sol.policy is None or sol.diagnostics.get("degraded"):
                any_failed = True
                infeasible_seen |= status == "infeasible"
                row += ["", "", status]
            else:
                row += [sol.objective, sol.diagnostics.get("solve_time", float("nan")), status]
        rows.append(row)

    writer = _Writer(args.out, manifest)
    writer.write_csv("sweep.csv", header, rows)
    writer.finish()
    for line in [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]:
        print(line)

    if HARD in variants and not args.no_assert:
        objs = [(g, results[g][HARD].objective) for g in sorted(gammas)
                if results[g][HARD].policy is not None]
        for (g1, o1), (g2, o2) in zip(objs, objs[1:]):
            slack = 10 * args.gap_tol * max(1.0, abs(o1))
            if o2 > o1 + slack:
                print(f"monotonicity violated: objective rose from {o1:.6f} (gamma={g1}) "
                      f"to {o2:.6f} (gamma={g2})", file=sys.stderr)
                return EXIT_SOLVER
    if any_failed:
        return EXIT_INFEASIBLE if infeasible_seen else EXIT_SOLVER
    return EXIT_OK


def cmd_simulate(args):
    problem = load_problem(args.problem)
    with open(args.solution, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "policy" not in doc:
        raise ProblemError("solution document has no policy")
    policy = policy_from_dict(doc["policy"])
    sys_ = problem.system
    if (policy.T, policy.m, policy.n) != (sys_.T, sys_.m, sys_.n):
        raise ProblemError(
            f"solution dimensions (T,m,n)=({policy.T},{policy.m},{policy.n}) do not match "
            f"problem ({sys_.T},{sys_.m},{sys_.n})")

    manifest = RunManifest(command="simulate", input=str(args.problem),
                           settings={"solution": str(args.solution), "N": args.N,
                                     "seed": args.seed},
                           out_dir=str(args.out), started=_now(), versions=_versions())

    lifted = build_lifted(sys_)
    analytic = moment_trajectory(policy, lifted)
    stats = monte_carlo(sys_, policy, args.N, args.seed)
    report = compare_moments(analytic, stats)

    rows = [[t, float(report.mean_dev_se[t]), float(report.cov_rel_err[t]),
             int(t in report.mean_flags), int(t in report.cov_flags)]
            for t in range(analytic.means.shape[0])]
    writer = _Writer(args.out, manifest)
    writer.write_csv("stats.csv", ["t", "mean_dev_se", "cov_rel_err", "mean_flag", "cov_flag"],
                     rows)
    verdict = "PASS" if report.ok else "FAIL"
    summary = [f"{verdict}: {len(report.mean_flags)} mean flags, "
               f"{len(report.cov_flags)} covariance flags over {analytic.means.shape[0]} stages",
               f"thresholds: {report.mean_se_limit} standard errors (mean), "
               f"{report.cov_rel_limit:.0%} relative Frobenius (covariance)",
               f"samples: {stats.N}",
               f"effort: sample {stats.effort_mean:.6f} +- {stats.effort_se:.6f} (1 SE)"]
    writer.write_text("summary.txt", "\n".join(summary) + "\n")
    writer.finish()
    print("\n".join(summary))
    return EXIT_OK if report.ok else EXIT_THRESHOLD


def build_parser():
    parser = argparse.ArgumentParser(prog="covsteer",
                                     description="Finite-horizon covariance steering solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--feas-tol", type=float, default=1e-8, dest="feas_tol")
        p.add_argument("--gap-tol", type=float, default=1e-8, dest="gap_tol")
        p.add_argument("--epsilon", type=float, default=1e-3,
                       help="CCP termination tolerance on successive objectives")

    p_solve = sub.add_parser("solve", help="solve one steering problem")
    p_solve.add_argument("problem")
    p_solve.add_argument("--variant", choices=[HARD, SOFT], default=None,
                         help="override the variant in the problem file")
    p_solve.add_argument("--gamma", type=int, default=None,
                         help="override the truncation parameter")
    p_solve.add_argument("--rho", type=float, default=None,
                         help="override the effort budget")
    common(p_solve)

    p_sweep = sub.add_parser("sweep", help="solve across truncation parameters")
    p_sweep.add_argument("problem")
    p_sweep.add_argument("--gammas", default=None,
                         help="comma-separated truncation values, e.g. 0,1,3,5")
    p_sweep.add_argument("--variant", choices=[HARD, SOFT, "both"], default="both")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="concurrent solves (default 1)")
    p_sweep.add_argument("--no-assert", action="store_true", dest="no_assert",
                         help="skip the hard-objective monotonicity check")
    common(p_sweep)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo validation of a solved policy")
    p_sim.add_argument("problem")
    p_sim.add_argument("solution", help="solution.json from a solve run")
    p_sim.add_argument("-N", type=int, default=100_000, help="number of rollouts")
    p_sim.add_argument("--seed", type=int, default=0, help="base stream seed")
    common(p_sim)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate}
    try:
        return handlers[args.command](args)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
