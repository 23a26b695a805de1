"""Problem data model: system, targets, file I/O and validation.

A steering problem is a discrete-time Gaussian linear system

    x(t+1) = A(t) x(t) + B(t) u(t) + w(t),    x(0) ~ N(mu0, Sigma0),

with i.i.d. noise w(t) ~ N(0, W), together with a terminal Gaussian target
N(mud, Sigmad), an effort budget ``rho`` (soft variant only) and a
disturbance-history truncation parameter ``gamma``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import min_eigval, psd_clamp, symmetry_defect

HARD = "hard"
SOFT = "soft"

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10

_FIELDS = ("n", "m", "T", "A", "B", "W", "mu0", "Sigma0",
           "mud", "Sigmad", "rho", "gamma", "variant")


class ProblemError(ValueError):
    """Base class for problem-definition failures."""


class ParseError(ProblemError):
    """The problem file could not be parsed at all."""


class SchemaError(ProblemError):
    """The problem file parses but lacks a required field or has a bad type."""


class DimensionError(ProblemError):
    """Matrix or vector shapes are inconsistent with the declared n, m, T."""


class ValidationError(ProblemError):
    """A type invariant is violated; carries the full report."""

    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(f"{i.field}: {i.message}" for i in report.issues))


@dataclass(frozen=True)
class GaussianSpec:
    """A Gaussian law N(mean, covariance)."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        if self.covariance.shape != (self.dim, self.dim):
            raise DimensionError(
                f"covariance shape {self.covariance.shape} does not match mean length {self.dim}")

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class SystemModel:
    """Time-varying linear dynamics with additive Gaussian noise.

    ``A`` has shape (T, n, n), ``B`` shape (T, n, m); ``W`` is the common
    n-by-n noise covariance and ``init`` the initial-state law.
    """

    n: int
    m: int
    T: int
    A: np.ndarray
    B: np.ndarray
    W: np.ndarray
    init: GaussianSpec

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float))
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float))
        if self.T < 1:
            raise ValidationError(ValidationReport(
                issues=[ValidationIssue("T", f"horizon must be at least 1, got {self.T}")]))
        if self.A.shape != (self.T, self.n, self.n):
            raise DimensionError(f"A must have shape ({self.T}, {self.n}, {self.n}), got {self.A.shape}")
        if self.B.shape != (self.T, self.n, self.m):
            raise DimensionError(f"B must have shape ({self.T}, {self.n}, {self.m}), got {self.B.shape}")
        if self.W.shape != (self.n, self.n):
            raise DimensionError(f"W must have shape ({self.n}, {self.n}), got {self.W.shape}")
        if self.init.dim != self.n:
            raise DimensionError(f"initial law has dimension {self.init.dim}, expected {self.n}")
        # round-off from file round-trips: treat nearly-PSD W as PSD, then clamp
        wnorm = float(np.linalg.norm(self.W))
        if symmetry_defect(self.W) <= SYMMETRY_RTOL and min_eigval(self.W) >= -PSD_RTOL * max(wnorm, 1.0):
            if min_eigval(self.W) < 0.0:
                object.__setattr__(self, "W", psd_clamp(self.W))


@dataclass(frozen=True)
class SteeringProblem:
    """A system plus terminal target, effort budget, truncation and variant."""

    system: SystemModel
    target: GaussianSpec
    rho: float
    gamma: int
    variant: str

    def __post_init__(self):
        if self.target.dim != self.system.n:
            raise DimensionError(
                f"target law has dimension {self.target.dim}, expected {self.system.n}")


@dataclass(frozen=True)
class ValidationIssue:
    field: str
    message: str


@dataclass
class ValidationReport:
    """Every violated invariant, plus informational notes (not violations)."""

    issues: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.issues

    def add(self, field_name, message):
        self.issues.append(ValidationIssue(field_name, message))


def _check_gaussian(report, prefix, spec, positive_definite):
    cov = spec.covariance
    if symmetry_defect(cov) > SYMMETRY_RTOL:
        report.add(prefix + ".covariance",
                   f"not symmetric (relative defect {symmetry_defect(cov):.3e})")
        return
    lmin = min_eigval(cov)
    scale = max(float(np.linalg.norm(cov)), 1.0)
    if positive_definite:
        if lmin <= 0.0:
            report.add(prefix + ".covariance",
                       f"not positive definite (min eigenvalue {lmin:.3e})")
    elif lmin < -PSD_RTOL * scale:
        report.add(prefix + ".covariance",
                   f"not positive semidefinite (min eigenvalue {lmin:.3e})")


def validate_system(system, report=None):
    """Check the SystemModel invariants, appending violations to ``report``."""
    if report is None:
        report = ValidationReport()
    if system.T < 1:
        report.add("T", f"horizon must be at least 1, got {system.T}")
    if symmetry_defect(system.W) > SYMMETRY_RTOL:
        report.add("W", f"not symmetric (relative defect {symmetry_defect(system.W):.3e})")
    else:
        wmin = min_eigval(system.W)
        scale = max(float(np.linalg.norm(system.W)), 1.0)
        if wmin < -PSD_RTOL * scale:
            report.add("W", f"not positive semidefinite (min eigenvalue {wmin:.3e})")
    _check_gaussian(report, "init", system.init, positive_definite=True)
    return report


def validate(problem):
    """Report every violated invariant of a SteeringProblem.

    Violations are report entries, never exceptions.  An empty report means
    the problem satisfies all type invariants.
    """
    report = ValidationReport()
    validate_system(problem.system, report)
    _check_gaussian(report, "target", problem.target, positive_definite=True)
    if not (0 <= problem.gamma <= problem.system.T):
        report.add("gamma", f"must lie in [0, T]=[0, {problem.system.T}], got {problem.gamma}")
    if problem.rho < 0:
        report.add("rho", f"must be nonnegative, got {problem.rho}")
    if problem.variant not in (HARD, SOFT):
        report.add("variant", f"must be '{HARD}' or '{SOFT}', got {problem.variant!r}")
    if problem.variant == HARD:
        report.notes.append("rho is ignored by the hard variant")
    return report


def _as_matrix_sequence(value, T, rows, cols, name):
    """Accept a single matrix (replicated across T) or a list of T matrices."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 2:
        if arr.shape != (rows, cols):
            raise DimensionError(f"{name} must be {rows}x{cols}, got {arr.shape}")
        return np.repeat(arr[None, :, :], T, axis=0)
    if arr.ndim == 3:
        if arr.shape != (T, rows, cols):
            raise DimensionError(
                f"{name} must be a list of {T} {rows}x{cols} matrices, got {arr.shape}")
        return arr
    raise DimensionError(f"{name} must be a matrix or a list of matrices")


def problem_from_dict(data):
    """Build and fully validate a SteeringProblem from a plain dict."""
    missing = [k for k in _FIELDS if k not in data]
    if missing:
        raise SchemaError(f"missing fields: {', '.join(missing)}")
    try:
        n = int(data["n"])
        m = int(data["m"])
        T = int(data["T"])
        rho = float(data["rho"])
        gamma = int(data["gamma"])
        variant = str(data["variant"]).lower()
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad scalar field: {exc}") from exc

    A = _as_matrix_sequence(data["A"], T, n, n, "A")
    B = _as_matrix_sequence(data["B"], T, n, m, "B")
    W = np.asarray(data["W"], dtype=float)
    mu0 = np.asarray(data["mu0"], dtype=float).reshape(-1)
    Sigma0 = np.asarray(data["Sigma0"], dtype=float)
    mud = np.asarray(data["mud"], dtype=float).reshape(-1)
    Sigmad = np.asarray(data["Sigmad"], dtype=float)
    if mu0.shape != (n,):
        raise DimensionError(f"mu0 must have length {n}, got {mu0.shape}")
    if mud.shape != (n,):
        raise DimensionError(f"mud must have length {n}, got {mud.shape}")

    system = SystemModel(n=n, m=m, T=T, A=A, B=B, W=W,
                         init=GaussianSpec(mu0, Sigma0))
    problem = SteeringProblem(system=system, target=GaussianSpec(mud, Sigmad),
                              rho=rho, gamma=gamma, variant=variant)
    report = validate(problem)
    if not report.ok:
        raise ValidationError(report)
    return problem


def _parse_text(text):
    """Parse the key/value problem format: ``key = value`` with JSON values."""
    data = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise ParseError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        value = value.strip()
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    if not data:
        raise ParseError("empty problem file")
    return data


def load_problem(path):
    """Load a SteeringProblem from a JSON or key/value text file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ParseError("top-level JSON value must be an object")
    except json.JSONDecodeError:
        data = _parse_text(text)
    return problem_from_dict(data)


def problem_to_dict(problem):
    sys_ = problem.system
    A = sys_.A
    B = sys_.B
    # collapse time-invariant sequences back to a single matrix
    if all(np.array_equal(A[0], A[t]) for t in range(sys_.T)):
        A_out = A[0].tolist()
    else:
        A_out = A.tolist()
    if all(np.array_equal(B[0], B[t]) for t in range(sys_.T)):
        B_out = B[0].tolist()
    else:
        B_out = B.tolist()
    return {
        "n": sys_.n, "m": sys_.m, "T": sys_.T,
        "A": A_out, "B": B_out, "W": sys_.W.tolist(),
        "mu0": sys_.init.mean.tolist(), "Sigma0": sys_.init.covariance.tolist(),
        "mud": problem.target.mean.tolist(), "Sigmad": problem.target.covariance.tolist(),
        "rho": problem.rho, "gamma": problem.gamma, "variant": problem.variant,
    }


def save_problem(problem, path, format="json"):
    """Write a problem file; ``format`` is ``"json"`` or ``"text"``.

    Float values are emitted with full repr precision so that a load/save
    round-trip reproduces matrix entries exactly.
    """
    data = problem_to_dict(problem)
    with open(path, "w", encoding="utf-8") as fh:
        if format == "json":
            json.dump(data, fh, indent=2)
            fh.write("\n")
        elif format == "text":
            for key in _FIELDS:
                fh.write(f"{key} = {json.dumps(data[key])}\n")
        else:
            raise ValueError(f"unknown format {format!r}")
