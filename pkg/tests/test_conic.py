import io

import numpy as np
import pytest

from covsteer import ConicProgram, SolverSettings, smat, svec
from covsteer.conic import NONNEG, SOC, ZERO, ProgramError


def test_svec_round_trip():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3, 6):
        M = rng.normal(size=(d, d))
        M = 0.5 * (M + M.T)
        np.testing.assert_allclose(smat(svec(M), d), M, rtol=1e-15, atol=0.0)


def test_svec_preserves_inner_products():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4)); A = A + A.T
    B = rng.normal(size=(4, 4)); B = B + B.T
    assert svec(A) @ svec(B) == pytest.approx(np.trace(A @ B), rel=1e-12)


def test_name_table_ranges():
    prog = ConicProgram()
    iu = prog.add_variables("ubar", 3)
    iL = prog.add_variables("L", 4)
    table = prog.name_table
    assert table["ubar"] == (0, 3)
    assert table["L"] == (3, 7)
    assert prog.num_vars == 7
    np.testing.assert_array_equal(iu, [0, 1, 2])
    np.testing.assert_array_equal(iL, [3, 4, 5, 6])
    spans = sorted(table.values())
    assert spans[0][0] == 0 and spans[-1][1] == prog.num_vars
    for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
        assert b1 == a2  # disjoint and covering
    with pytest.raises(ProgramError):
        prog.add_variables("ubar", 1)


def test_min_linear_with_bound():
    prog = ConicProgram()
    x = prog.add_variables("x", 1)
    prog.add_objective_term(x[0], 1.0)
    prog.add_constraint(NONNEG, [({x[0]: 1.0}, -1.0)])  # x - 1 >= 0
    sol = prog.solve()
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)


def test_quad_epigraph_fixed_point():
    # x pinned to [3, 4] by equalities; minimal t with t >= ||x||^2 is 25
    prog = ConicProgram()
    x = prog.add_variables("x", 2)
    t = prog.add_variables("t", 1)[0]
    prog.add_constraint(ZERO, [({x[0]: 1.0}, -3.0), ({x[1]: 1.0}, -4.0)])
    prog.add_quad_epigraph(list(x), t)
    prog.add_objective_term(t, 1.0)
    sol = prog.solve()
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(25.0, rel=1e-6)
    assert sol.eq_residual <= 1e-8


def test_quad_epigraph_empty_x():
    prog = ConicProgram()
    t = prog.add_variables("t", 1)[0]
    prog.add_quad_epigraph([], t)
    prog.add_objective_term(t, 1.0)
    sol = prog.solve()
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(0.0, abs=1e-7)


def test_quad_epigraph_random_norm():
    rng = np.random.default_rng(2)
    target = rng.normal(size=5)
    prog = ConicProgram()
    x = prog.add_variables("x", 5)
    t = prog.add_variables("t", 1)[0]
    prog.add_constraint(ZERO, [({x[i]: 1.0}, -float(target[i])) for i in range(5)])
    prog.add_quad_epigraph(list(x), t)
    prog.add_objective_term(t, 1.0)
    sol = prog.solve()
    assert sol.objective_value == pytest.approx(float(target @ target), rel=1e-6)


def test_psd_constant_identity_feasible():
    prog = ConicProgram()
    prog.add_variables("x", 1)
    prog.add_psd_block({(i, i): 1.0 for i in range(3)}, 3)
    assert prog.solve().status == "optimal"


def test_psd_constant_negative_infeasible():
    prog = ConicProgram()
    prog.add_variables("x", 1)
    prog.add_psd_block({(i, i): -1.0 for i in range(3)}, 3)
    assert prog.solve().status == "infeasible"


def test_psd_correlation_bound():
    # [[1, y], [y, 1]] >= 0, maximize y -> y* = 1
    prog = ConicProgram()
    y = prog.add_variables("y", 1)[0]
    prog.add_psd_block({(0, 0): 1.0, (1, 1): 1.0, (1, 0): ({y: 1.0}, 0.0)}, 2)
    prog.add_objective_term(y, -1.0)
    sol = prog.solve()
    assert sol.status == "optimal"
    assert sol.primal[y] == pytest.approx(1.0, abs=1e-6)


def test_psd_trace_minimization():
    # min tr(X) s.t. X >= I (2x2): optimum 2
    prog = ConicProgram()
    x = prog.add_variables("X", 3)  # svec order: X00, X10, X11
    prog.add_psd_block({(0, 0): ({x[0]: 1.0}, -1.0),
                        (1, 0): ({x[1]: 1.0}, 0.0),
                        (1, 1): ({x[2]: 1.0}, -1.0)}, 2)
    prog.add_objective_term(x[0], 1.0)
    prog.add_objective_term(x[2], 1.0)
    sol = prog.solve()
    assert sol.objective_value == pytest.approx(2.0, rel=1e-7)


def test_psd_asymmetry_error():
    prog = ConicProgram()
    y = prog.add_variables("y", 1)[0]
    with pytest.raises(ProgramError):
        prog.add_psd_block({(0, 1): ({y: 1.0}, 0.0), (1, 0): ({y: 2.0}, 0.0),
                            (0, 0): 1.0, (1, 1): 1.0}, 2)


def test_unbounded_status():
    prog = ConicProgram()
    x = prog.add_variables("x", 1)
    prog.add_objective_term(x[0], 1.0)  # min x, unconstrained below
    prog.add_constraint(NONNEG, [({x[0]: -1.0}, 10.0)])  # x <= 10 only
    assert prog.solve().status == "unbounded"


def test_scaling_soundness():
    rng = np.random.default_rng(3)
    target = rng.normal(size=4)
    def build(scale):
        prog = ConicProgram()
        x = prog.add_variables("x", 4)
        t = prog.add_variables("t", 1)[0]
        rows = [({x[i]: 1.0}, -float(target[i])) for i in range(4)]
        prog.add_constraint(ZERO, rows)
        prog.add_quad_epigraph(list(x), t)
        prog.add_objective_term(t, scale)
        return prog, x
    base, xb = build(1.0)
    scaled, xs = build(7.0)
    sol1, sol7 = base.solve(), scaled.solve()
    assert sol7.objective_value == pytest.approx(7.0 * sol1.objective_value, rel=1e-6)
    gap = SolverSettings().gap_tol
    np.testing.assert_allclose(sol1.primal[xb], sol7.primal[xs], atol=10 * gap + 1e-9)


def test_objective_constant_carried():
    prog = ConicProgram()
    x = prog.add_variables("x", 1)
    prog.add_constraint(ZERO, [({x[0]: 1.0}, -2.0)])
    prog.set_objective({x[0]: 1.0}, constant=5.0)
    sol = prog.solve()
    assert sol.objective_value == pytest.approx(7.0, rel=1e-8)


def test_soc_ball():
    prog = ConicProgram()
    x = prog.add_variables("x", 2)
    prog.add_constraint(SOC, [({}, 1.0), ({x[0]: 1.0}, 0.0), ({x[1]: 1.0}, 0.0)])
    prog.add_objective_term(x[0], -1.0)  # max x0 over the unit ball
    sol = prog.solve()
    assert sol.primal[x[0]] == pytest.approx(1.0, abs=1e-6)


def test_dump_listing():
    prog = ConicProgram()
    x = prog.add_variables("x", 2)
    t = prog.add_variables("t", 1)[0]
    prog.add_quad_epigraph(list(x), t)
    prog.add_objective_term(t, 1.0)
    buf = io.StringIO()
    prog.dump(buf)
    text = buf.getvalue()
    assert "minimize" in text
    assert "rsoc" in text
    assert "x[0:2]" in text


def test_infeasible_solution_has_no_primal():
    prog = ConicProgram()
    x = prog.add_variables("x", 1)
    prog.add_constraint(ZERO, [({x[0]: 1.0}, -1.0)])
    prog.add_constraint(ZERO, [({x[0]: 1.0}, 1.0)])
    sol = prog.solve()
    assert sol.status == "infeasible"
    assert sol.primal is None
    assert np.isnan(sol.objective_value)
