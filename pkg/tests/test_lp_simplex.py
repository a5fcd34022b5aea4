from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from heatmoments.lp_simplex import IterationLimitError, LPProblem, solve, write_iteration_log

from oracles import lp_min_bruteforce


def random_lp(seed, m, n):
    """Feasible and bounded: b = A x0 with x0 >= 0, c = A^T y0 + s with s >= 0."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = np.where(rng.random(n) < 0.5, rng.random(n), 0.0)
    y0 = rng.normal(size=m)
    c = A.T @ y0 + rng.random(n)
    return LPProblem(c, A, A @ x0)


def test_simple_examples():
    sol = solve(LPProblem([1, 1], [[1, 1]], [1]))
    assert sol.status == "optimal" and sol.objective == pytest.approx(1.0)
    assert sorted(sol.x.tolist()) == [0.0, 1.0]
    assert solve(LPProblem([0], [[1]], [-1])).status == "infeasible"
    assert solve(LPProblem([-1, 0], [[1, -1]], [0])).status == "unbounded"


def test_problem_validation():
    with pytest.raises(ValueError):
        LPProblem([1, 1], [[1, 1]], [1, 2])
    with pytest.raises(ValueError):
        LPProblem([1], [[np.inf]], [1])
    with pytest.raises(ValueError):
        LPProblem([], np.zeros((0, 0)), [])


def test_iteration_limit_is_distinct_error():
    p = random_lp(1, 8, 20)
    with pytest.raises(IterationLimitError):
        solve(p, max_iters=2)


def test_cycling_example_terminates():
    # classic degenerate instance on which textbook Dantzig pivoting cycles
    c = [0, 0, 0, -0.75, 150, -0.02, 6]
    A = [
        [1, 0, 0, 0.25, -60, -0.04, 9],
        [0, 1, 0, 0.5, -90, -0.02, 3],
        [0, 0, 1, 0, 0, 1, 0],
    ]
    sol = solve(LPProblem(c, A, [0, 0, 1]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-12)


def test_redundant_rows():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 0.0, -1.0]])
    sol = solve(LPProblem([1.0, 2.0, 3.0], A, [1.0, 2.0, 0.0]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(2.0)
    np.testing.assert_allclose(A @ sol.x, [1, 2, 0], atol=1e-12)


@given(st.integers(0, 2**31), st.integers(1, 20), st.integers(0, 40))
def test_duality_and_vertex_property(seed, m, extra):
    p = random_lp(seed, m, m + extra)
    sol = solve(p)
    assert sol.status == "optimal"
    assert np.count_nonzero(sol.x) <= m
    assert np.all(sol.reduced_costs >= -1e-7 * (1 + np.max(np.abs(p.cost))))
    dual_obj = float(p.b @ sol.duals)
    assert sol.objective == pytest.approx(dual_obj, rel=1e-7, abs=1e-7)
    np.testing.assert_allclose(p.A @ sol.x, p.b, atol=1e-8 * (1 + np.max(np.abs(p.b))))
    ref = linprog(p.cost, A_eq=p.A, b_eq=p.b, bounds=(0, None), method="highs")
    assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)


@given(st.integers(0, 2**31), st.integers(1, 5), st.integers(0, 5))
def test_against_vertex_enumeration(seed, m, extra):
    p = random_lp(seed, m, m + extra)
    sol = solve(p)
    assert sol.objective == pytest.approx(lp_min_bruteforce(p.cost, p.A, p.b), rel=1e-9, abs=1e-9)


@given(st.integers(0, 2**31))
def test_infeasible_detected(seed):
    rng = np.random.default_rng(seed)
    A = np.abs(rng.normal(size=(3, 6))) + 0.1
    # positive matrix and negative rhs: no nonnegative solution
    assert solve(LPProblem(np.ones(6), A, -np.ones(3))).status == "infeasible"


def test_deterministic():
    p = random_lp(42, 15, 50)
    a, b = solve(p), solve(p)
    assert a.basis == b.basis
    assert a.x.tobytes() == b.x.tobytes()


def test_negative_rhs_duals_signs():
    p = LPProblem([1.0, 2.0], [[-1.0, -1.0]], [-3.0])
    sol = solve(p)
    assert sol.objective == pytest.approx(3.0)
    assert float(p.b @ sol.duals) == pytest.approx(3.0)


def test_iteration_log(tmp_path):
    sol = solve(random_lp(3, 5, 12), record=True)
    write_iteration_log(sol, tmp_path / "it.csv")
    lines = (tmp_path / "it.csv").read_text().splitlines()
    assert lines[0] == "iter,objective,entering,leaving"
    assert len(lines) == sol.iterations + 1
