"""Solver-agnostic cone-program container and the engine adapter.

A ConicProgram is a linear objective over named scalar variables plus a list
of affine-map-in-cone constraints.  Supported cones: zero (equality),
nonnegative orthant, second-order, rotated second-order, and PSD (symmetric
matrices in scaled lower-triangular vectorization, off-diagonals times
sqrt(2)).  Exactly one entry point talks to an engine: :meth:`ConicProgram.solve`,
currently backed by Clarabel; rotated cones are converted to plain
second-order cones at adapter level.

Affine rows are written as ``(coeffs, const)`` with ``coeffs`` a dict mapping
variable index to coefficient; the constraint is ``A x + b in cone``.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
RSOC = "rsoc"
PSD = "psd"

_SQRT2 = np.sqrt(2.0)


def svec(M):
    """Scaled lower-triangular vectorization of a symmetric matrix.

    Row-major over the lower triangle with off-diagonal entries multiplied
    by sqrt(2), so that svec(A) @ svec(B) == trace(A @ B).
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    out = np.empty(d * (d + 1) // 2)
    k = 0
    for i in range(d):
        for j in range(i + 1):
            out[k] = M[i, j] if i == j else _SQRT2 * M[i, j]
            k += 1
    return out


def smat(v, d):
    """Inverse of :func:`svec` for a d x d symmetric matrix."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d * (d + 1) // 2,):
        raise ValueError(f"vector length {v.shape} does not match side {d}")
    M = np.zeros((d, d))
    k = 0
    for i in range(d):
        for j in range(i + 1):
            if i == j:
                M[i, j] = v[k]
            else:
                M[i, j] = M[j, i] = v[k] / _SQRT2
            k += 1
    return M


@dataclass
class SolverSettings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 100_000
    verbosity: int = 0


@dataclass
class ConicSolution:
    """Engine result: status in {optimal, infeasible, unbounded, numeric-limit}."""

    status: str
    objective_value: float
    primal: np.ndarray | None
    solve_time: float
    iterations: int
    eq_residual: float = float("nan")


@dataclass
class _Block:
    cone: str
    rows: list
    psd_side: int = 0


class ProgramError(ValueError):
    """Malformed program construction (bad indices, asymmetric PSD entries)."""


@dataclass
class ConicProgram:
    """Cone program under construction; single-owner mutation, solve when done."""

    num_vars: int = 0
    objective_constant: float = 0.0
    _objective: dict = field(default_factory=dict)
    _blocks: list = field(default_factory=list)
    _names: dict = field(default_factory=dict)

    # -- variables ---------------------------------------------------------
    def add_variables(self, name, count):
        """Register ``count`` scalar variables under ``name``; returns their indices."""
        if name in self._names:
            raise ProgramError(f"variable block {name!r} already exists")
        if count < 0:
            raise ProgramError("count must be nonnegative")
        start = self.num_vars
        self.num_vars += count
        self._names[name] = (start, self.num_vars)
        return np.arange(start, self.num_vars)

    def variables(self, name):
        start, stop = self._names[name]
        return np.arange(start, stop)

    @property
    def name_table(self):
        return dict(self._names)

    def _check_index(self, idx):
        if not (0 <= idx < self.num_vars):
            raise ProgramError(f"variable index {idx} outside [0, {self.num_vars})")

    # -- objective ---------------------------------------------------------
    def add_objective_term(self, index, coeff):
        self._check_index(int(index))
        self._objective[int(index)] = self._objective.get(int(index), 0.0) + float(coeff)

    def set_objective(self, coeffs, constant=0.0):
        self._objective = {}
        for idx, c in coeffs.items():
            self.add_objective_term(idx, c)
        self.objective_constant = float(constant)

    @property
    def objective(self):
        return dict(self._objective)

    # -- constraints -------------------------------------------------------
    def add_constraint(self, cone, rows, psd_side=0):
        """Append ``A x + b in cone`` given rows of (coeffs dict, const)."""
        if cone not in (ZERO, NONNEG, SOC, RSOC, PSD):
            raise ProgramError(f"unknown cone {cone!r}")
        clean = []
        for coeffs, const in rows:
            for idx in coeffs:
                self._check_index(int(idx))
            clean.append(({int(k): float(v) for k, v in coeffs.items() if v != 0.0},
                          float(const)))
        if cone == RSOC and len(clean) < 2:
            raise ProgramError("rotated second-order cone needs at least 2 rows")
        if cone == SOC and len(clean) < 1:
            raise ProgramError("second-order cone needs at least 1 row")
        if cone == PSD:
            if psd_side * (psd_side + 1) // 2 != len(clean):
                raise ProgramError(
                    f"PSD block of side {psd_side} needs {psd_side * (psd_side + 1) // 2} rows")
        self._blocks.append(_Block(cone=cone, rows=clean, psd_side=psd_side))

    def add_quad_epigraph(self, x_indices, t_index):
        """Add t >= ||x||^2 as a rotated second-order cone (t, 1/2, x)."""
        self._check_index(int(t_index))
        rows = [({int(t_index): 1.0}, 0.0), ({}, 0.5)]
        for idx in x_indices:
            self._check_index(int(idx))
            rows.append(({int(idx): 1.0}, 0.0))
        self.add_constraint(RSOC, rows)

    def add_quad_epigraph_rows(self, rows, t_index):
        """Like :meth:`add_quad_epigraph` but with affine rows for x."""
        self._check_index(int(t_index))
        full = [({int(t_index): 1.0}, 0.0), ({}, 0.5)] + list(rows)
        self.add_constraint(RSOC, full)

    def add_psd_block(self, affine_entries, d):
        """Add PSD membership of a symmetric affine d x d matrix map.

        ``affine_entries`` maps (i, j) to either a float constant or a
        ``(coeffs, const)`` pair.  Entries given at both (i, j) and (j, i)
        must agree, otherwise an asymmetry error is raised; missing entries
        are zero.
        """
        canon = {}
        for (i, j), value in affine_entries.items():
            if not (0 <= i < d and 0 <= j < d):
                raise ProgramError(f"entry ({i}, {j}) outside a {d}x{d} block")
            if isinstance(value, tuple):
                coeffs, const = value
                entry = ({int(k): float(v) for k, v in coeffs.items()}, float(const))
            else:
                entry = ({}, float(value))
            key = (max(i, j), min(i, j))
            if key in canon:
                other = canon[key]
                if other[0] != entry[0] or other[1] != entry[1]:
                    raise ProgramError(f"asymmetric entries at ({i}, {j}) and ({j}, {i})")
            else:
                canon[key] = entry
        rows = []
        for i in range(d):
            for j in range(i + 1):
                coeffs, const = canon.get((i, j), ({}, 0.0))
                scale = 1.0 if i == j else _SQRT2
                rows.append(({k: scale * v for k, v in coeffs.items()}, scale * const))
        self.add_constraint(PSD, rows, psd_side=d)

    # -- debug listing -----------------------------------------------------
    def dump(self, stream):
        """Plain-text standard-form listing for cross-checking."""

        def expr(coeffs, const):
            parts = [f"{v:+.12g}*x{k}" for k, v in sorted(coeffs.items())]
            if const != 0.0 or not parts:
                parts.append(f"{const:+.12g}")
            return " ".join(parts)

        stream.write(f"minimize {expr(self._objective, self.objective_constant)}\n")
        stream.write(f"variables {self.num_vars}: "
                     + ", ".join(f"{k}[{a}:{b}]" for k, (a, b) in self._names.items())
                     + "\n")
        for bi, block in enumerate(self._blocks):
            tag = block.cone if block.cone != PSD else f"psd({block.psd_side})"
            for coeffs, const in block.rows:
                stream.write(f"c{bi} {tag}: {expr(coeffs, const)}\n")

    # -- solve -------------------------------------------------------------
    def solve(self, settings=None):
        """Solve with the backing engine and map its status onto the contract."""
        return _solve_clarabel(self, settings or SolverSettings())


def _ordered_blocks(program):
    order = {ZERO: 0, NONNEG: 1, SOC: 2, RSOC: 2, PSD: 3}
    return sorted(program._blocks, key=lambda b: order[b.cone])


def _rsoc_to_soc(rows):
    """(u, v, x) with 2uv >= ||x||^2 maps to (u+v, u-v, sqrt2 * x) in a SOC."""
    (cu, bu), (cv, bv) = rows[0], rows[1]
    top = dict(cu)
    for k, v in cv.items():
        top[k] = top.get(k, 0.0) + v
    bot = dict(cu)
    for k, v in cv.items():
        bot[k] = bot.get(k, 0.0) - v
    out = [(top, bu + bv), (bot, bu - bv)]
    for coeffs, const in rows[2:]:
        out.append(({k: _SQRT2 * v for k, v in coeffs.items()}, _SQRT2 * const))
    return out


def _solve_clarabel(program, settings):
    import clarabel

    rows_i, cols_i, vals = [], [], []
    b = []
    cones = []
    r0 = 0
    for block in _ordered_blocks(program):
        rws = block.rows if block.cone != RSOC else _rsoc_to_soc(block.rows)
        for k, (coeffs, const) in enumerate(rws):
            for col, v in coeffs.items():
                rows_i.append(r0 + k)
                cols_i.append(col)
                vals.append(-v)  # engine form: -A x + s = b, s in cone
            b.append(const)
        r0 += len(rws)
        if block.cone == ZERO:
            cones.append(clarabel.ZeroConeT(len(rws)))
        elif block.cone == NONNEG:
            cones.append(clarabel.NonnegativeConeT(len(rws)))
        elif block.cone in (SOC, RSOC):
            cones.append(clarabel.SecondOrderConeT(len(rws)))
        else:
            cones.append(clarabel.PSDTriangleConeT(block.psd_side))

    A = sparse.csc_matrix((vals, (rows_i, cols_i)), shape=(r0, program.num_vars))
    bvec = np.asarray(b)
    q = np.zeros(program.num_vars)
    for idx, c in program._objective.items():
        q[idx] = c
    P = sparse.csc_matrix((program.num_vars, program.num_vars))

    cfg = clarabel.DefaultSettings()
    cfg.verbose = settings.verbosity > 0
    cfg.tol_feas = settings.feas_tol
    cfg.tol_gap_abs = settings.gap_tol
    cfg.tol_gap_rel = settings.gap_tol
    cfg.max_iter = min(int(settings.max_iter), 2 ** 31 - 1)

    t0 = time.perf_counter()
    result = clarabel.DefaultSolver(P, q, A, bvec, cones, cfg).solve()
    elapsed = time.perf_counter() - t0

    name = str(result.status)
    if name == "Solved":
        status = "optimal"
    elif name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = "infeasible"
    elif name in ("DualInfeasible", "AlmostDualInfeasible"):
        status = "unbounded"
    else:
        status = "numeric-limit"

    if status == "optimal":
        primal = np.asarray(result.x)
        objective = float(q @ primal) + program.objective_constant
        eq_res = 0.0
        for block in program._blocks:
            if block.cone == ZERO:
                for coeffs, const in block.rows:
                    val = const + sum(v * primal[col] for col, v in coeffs.items())
                    eq_res = max(eq_res, abs(val))
    else:
        primal = None
        objective = float("nan")
        eq_res = float("nan")
    return ConicSolution(status=status, objective_value=objective, primal=primal,
                         solve_time=elapsed, iterations=int(result.iterations),
                         eq_residual=eq_res)
