import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamform.socp import (SOC, ConeProgram, ConeSolution, SolverSettings, Zero, check_kkt, cone_violation,
                           dump_program, load_program, solve)
from beamform.socp.io import dumps, loads
from oracles import barrier_socp, planted_socp

ROOT5 = np.sqrt(5.0)


def root5_program():
    # min u s.t. (u, 1, 2) in SOC(3)
    return ConeProgram(p=[1.0], f=[0.0, 1.0, 2.0], F=[[1.0, 0.0, 0.0]], cones=(SOC(3),))


def as_program(p, f, F, cones):
    return ConeProgram(p, f, F, tuple(SOC(d) if k == "soc" else Zero(d) for k, d in cones))


def test_root5_norm_minimization():
    sol = solve(root5_program())
    assert sol.status == "optimal"
    assert sol.u[0] == pytest.approx(ROOT5, abs=1e-6)
    assert max(sol.primal_residual, sol.dual_residual, sol.duality_gap) < 1e-8


def test_zero_cone_pins_variable():
    sol = solve(ConeProgram([1.0], [-3.0], [[1.0]], (Zero(1),)))
    assert sol.status == "optimal"
    assert sol.u[0] == pytest.approx(3.0, abs=1e-12)


def test_zero_problem():
    prog = ConeProgram([0.0], [0.0], [[0.0]], (Zero(1),))
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.u[0] == 0.0
    rep = check_kkt(prog, sol)
    assert rep.max() == 0.0 and rep.complementarity == 0.0


def test_kkt_of_analytic_optimum():
    prog = root5_program()
    z = np.array([1.0, -1.0 / ROOT5, -2.0 / ROOT5])
    rep = check_kkt(prog, ConeSolution(np.array([ROOT5]), "optimal", 0, 0, 0, 0, z))
    assert rep.max() < 1e-8 and rep.complementarity < 1e-8


def test_kkt_detects_perturbation():
    prog = root5_program()
    z = np.array([1.0, -1.0 / ROOT5, -2.0 / ROOT5])
    for du in (1e-3, -1e-3):
        rep = check_kkt(prog, ConeSolution(np.array([ROOT5 + du]), "optimal", 0, 0, 0, 0, z))
        assert rep.max() > 1e-4


def test_solution_carries_complementary_dual():
    prog = root5_program()
    sol = solve(prog)
    s = prog.slack(sol.u)
    assert abs(s @ sol.z) < 1e-8
    assert cone_violation(prog, sol.z, dual=True) < 1e-10
    np.testing.assert_allclose(prog.F @ sol.z, prog.p, atol=1e-10)


def test_solve_is_deterministic():
    rng = np.random.default_rng(11)
    prog = as_program(*planted_socp(rng, 6, [4, 3, 2], 1)[:4])
    a, b = solve(prog), solve(prog)
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.z, b.z)
    assert a.iterations == b.iterations


def test_infeasible_program_returns_certificate():
    # (-1, u) in SOC(2) has no solution
    prog = ConeProgram([1.0], [-1.0, 0.0], [[0.0, 1.0]], (SOC(2),))
    sol = solve(prog)
    assert sol.status == "infeasible"
    assert sol.u is None
    z = sol.z
    # Farkas: F z = 0, z in K, f'z < 0
    np.testing.assert_allclose(prog.F @ z, 0.0, atol=1e-7)
    assert prog.f @ z < 0
    assert cone_violation(prog, z, dual=True) < 1e-7


def test_inconsistent_equalities_are_infeasible():
    prog = ConeProgram([1.0], [-1.0, -2.0], [[1.0, 1.0]], (Zero(2),))
    assert solve(prog).status == "infeasible"


def test_unbounded_below():
    # min -u s.t. u >= 1 (a one-dimensional SOC is the nonnegative ray)
    prog = ConeProgram([-1.0], [-1.0], [[1.0]], (SOC(1),))
    assert solve(prog).status == "unbounded"
    # min -u s.t. (u, 1) in SOC(2)
    prog = ConeProgram([-1.0], [0.0, 1.0], [[1.0, 0.0]], (SOC(2),))
    assert solve(prog).status == "unbounded"


def test_objective_along_invisible_direction_is_unbounded():
    prog = ConeProgram([0.0, 1.0], [1.0, 0.0], [[0.0, 1.0], [0.0, 0.0]], (SOC(2),))
    assert solve(prog).status == "unbounded"


def test_iteration_cap_reported():
    rng = np.random.default_rng(2)
    prog = as_program(*planted_socp(rng, 8, [5, 5, 4])[:4])
    sol = solve(prog, SolverSettings(max_iter=2, polish=0))
    assert sol.status == "max-iterations"
    assert sol.iterations == 2


def test_program_validation():
    with pytest.raises(ValueError):
        ConeProgram([1.0], [0.0, 1.0], [[1.0, 0.0]], (SOC(3),))
    with pytest.raises(ValueError):
        ConeProgram([1.0], [0.0], [[1.0]], (("box", 1),))
    with pytest.raises(ValueError):
        ConeProgram([np.nan], [0.0], [[1.0]], (Zero(1),))


def test_random_planted_programs_hit_known_optimum():
    rng = np.random.default_rng(1234)
    for _ in range(60):
        n = int(rng.integers(1, 9))
        dims = [int(d) for d in rng.integers(1, 6, size=rng.integers(1, 4))]
        p, f, F, cones, opt = planted_socp(rng, n, dims, int(rng.integers(0, 3)) if n > 2 else 0)
        prog = as_program(p, f, F, cones)
        sol = solve(prog)
        assert sol.status == "optimal"
        assert check_kkt(prog, sol).max() < 1e-8
        assert abs(p @ sol.u - opt) < 1e-6 * max(1.0, abs(opt))


def test_agrees_with_independent_barrier_method():
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 25:
        n = int(rng.integers(1, 7))
        dims = [int(d) for d in rng.integers(2, 6, size=rng.integers(1, 3))]
        p, f, F, cones, opt = planted_socp(rng, n, dims)
        try:
            ref, _ = barrier_socp(p, f, F, dims)
        except RuntimeError:
            continue  # empty interior: the barrier oracle does not apply
        sol = solve(as_program(p, f, F, cones))
        assert abs(p @ sol.u - ref) < 1e-3 * max(1.0, abs(ref))
        checked += 1


def _grid_min(prog, center, radius, levels=7, pts=41):
    """Zooming grid search of the feasible set for programs with n <= 2."""
    best_val, best_u = np.inf, None
    c, r = np.asarray(center, float), radius
    for _ in range(levels):
        axes = [np.linspace(ci - r, ci + r, pts) for ci in c]
        for u in np.stack(np.meshgrid(*axes), -1).reshape(-1, c.size):
            if cone_violation(prog, prog.slack(u)) <= 1e-12:
                v = prog.p @ u
                if v < best_val:
                    best_val, best_u = v, u
        if best_u is None:
            return np.inf
        c, r = best_u, 4 * r / (pts - 1)
    return best_val


def test_grid_brute_force_on_small_programs():
    rng = np.random.default_rng(5)
    done = 0
    while done < 15:
        n = int(rng.integers(1, 3))
        p, f, F, cones, opt = planted_socp(rng, n, [3, 2])
        prog = as_program(p, f, F, cones)
        sol = solve(prog)
        grid = _grid_min(prog, sol.u, 4.0)
        if not np.isfinite(grid):
            continue  # feasible set has no interior on the grid
        assert grid >= p @ sol.u - 1e-9  # nothing on the grid beats the solver
        assert grid - p @ sol.u < 1e-3
        done += 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 8))
def test_property_solution_feasible_and_kkt(seed, n):
    rng = np.random.default_rng(seed)
    dims = [int(d) for d in rng.integers(1, 6, size=rng.integers(1, 4))]
    prog = as_program(*planted_socp(rng, n, dims, int(rng.integers(0, 2)) if n > 1 else 0)[:4])
    sol = solve(prog)
    assert sol.status == "optimal"
    rep = check_kkt(prog, sol)
    assert rep.max() < 1e-8
    assert cone_violation(prog, prog.slack(sol.u)) <= 1e-8 * max(1.0, np.linalg.norm(prog.slack(sol.u)))


def test_dump_load_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    prog = as_program(*planted_socp(rng, 5, [4, 2], 1)[:4])
    path = tmp_path / "prog.socp"
    dump_program(prog, path)
    back = load_program(path)
    np.testing.assert_array_equal(back.F, prog.F)
    np.testing.assert_array_equal(back.f, prog.f)
    np.testing.assert_array_equal(back.p, prog.p)
    assert back.cones == prog.cones
    np.testing.assert_array_equal(solve(back).u, solve(prog).u)


@pytest.mark.parametrize("text", ["", "socp 2\n", "socp 1\nn 1 m 1\ncones soc:1\np\n1\nf\n1 2\nF\n1\n",
                                  "socp 1\nn 1 m 1\ncones soc:1\nq\n1\nf\n1\nF\n1\n"])
def test_load_rejects_malformed(text):
    with pytest.raises((ValueError, IndexError)):
        loads(text)


def test_comments_are_ignored():
    prog = loads("# written by hand\n" + dumps(root5_program()))
    assert solve(prog).u[0] == pytest.approx(ROOT5, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 6), tail_scale=st.sampled_from([1.0, 1e-8, 1e-150]))
def test_max_step_reaches_cone_boundary(seed, d, tail_scale):
    from beamform.socp import _ipm
    rng = np.random.default_rng(seed)
    lam = np.concatenate([[1.0], tail_scale * rng.uniform(-1, 1, d - 1) / max(1, d)])
    dirn = rng.standard_normal(d)
    offs, dims = np.array([0]), np.array([d])
    alpha = _ipm._max_step(lam, dirn, offs, dims)
    inside = lambda v: v[0] >= np.linalg.norm(v[1:]) - 1e-12
    if np.isinf(alpha):
        assert inside(lam + 1e6 * dirn)
    else:
        assert inside(lam + 0.999 * alpha * dirn)
        assert not inside(lam + 1.001 * alpha * dirn + 1e-9 * np.concatenate([[-1.0], np.zeros(d - 1)]))
