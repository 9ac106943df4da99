"""Dual simplex: reference cases, random-LP oracle equivalence, determinism."""

import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from mgsched.errors import DomainError
from mgsched.lp import LinearProgram, solve_lp


def make_lp(c, lb, ub, A=None, senses=(), rhs=()):
    mat = sp.csr_matrix(np.asarray(A, dtype=float)) if A is not None else None
    return LinearProgram(c=np.asarray(c, float), lb=np.asarray(lb, float),
                         ub=np.asarray(ub, float), a_matrix=mat,
                         senses=np.asarray(senses, dtype="U1"),
                         rhs=np.asarray(rhs, float))


def vertex_oracle(c, lb, ub, A, senses, rhs, tol=1e-9):
    """Enumerate candidate vertices: n active constraints among rows and bounds."""
    c, lb, ub = map(np.asarray, (c, lb, ub))
    A = np.asarray(A, dtype=float)
    n, m = len(c), len(rhs)
    cons = [("row", i) for i in range(m)]
    cons += [("lo", j) for j in range(n)] + [("up", j) for j in range(n)]
    best = None
    for combo in itertools.combinations(range(len(cons)), n):
        mat = np.zeros((n, n))
        vec = np.zeros(n)
        for k, ci in enumerate(combo):
            kind, idx = cons[ci]
            if kind == "row":
                mat[k] = A[idx]
                vec[k] = rhs[idx]
            else:
                mat[k, idx] = 1.0
                vec[k] = lb[idx] if kind == "lo" else ub[idx]
        try:
            x = np.linalg.solve(mat, vec)
        except np.linalg.LinAlgError:
            continue
        if np.any(x < lb - tol) or np.any(x > ub + tol):
            continue
        ax = A @ x
        ok = True
        for i, s in enumerate(senses):
            if ((s == "<" and ax[i] > rhs[i] + tol)
                    or (s == ">" and ax[i] < rhs[i] - tol)
                    or (s == "=" and abs(ax[i] - rhs[i]) > tol)):
                ok = False
                break
        if ok:
            obj = float(c @ x)
            if best is None or obj > best:
                best = obj
    return best


class TestReferenceCases:
    def test_bound_only(self):
        sol = solve_lp(make_lp([1.0], [0.0], [3.0]))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0)
        assert sol.x[0] == pytest.approx(3.0)

    def test_symmetric_budget(self):
        sol = solve_lp(make_lp([1.0, 1.0], [0, 0], [1, 1],
                               A=[[1.0, 1.0]], senses=["<"], rhs=[1.0]))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-9)

    def test_equality_row(self):
        sol = solve_lp(make_lp([1.0, -1.0], [0, 0], [5, 5],
                               A=[[1.0, 1.0]], senses=["="], rhs=[3.0]))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(3.0, abs=1e-7)

    def test_infeasible_detected(self):
        sol = solve_lp(make_lp([1.0], [0.0], [5.0],
                               A=[[1.0], [1.0]], senses=["<", ">"],
                               rhs=[1.0, 3.0]))
        assert sol.status == "infeasible"
        assert sol.infeasible_row is not None

    def test_infeasible_box(self):
        lp = make_lp([1.0, 1.0], [0, 0], [1, 1],
                     A=[[1.0, 1.0]], senses=[">"], rhs=[5.0])
        assert solve_lp(lp).status == "infeasible"

    def test_degenerate_rows_terminate(self):
        # many redundant equalities around one point; anti-cycling must hold
        A = [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]]
        lp = make_lp([1.0, 2.0, 3.0], [0, 0, 0], [4, 4, 4],
                     A=A, senses=["<", "<", "<", "<"], rhs=[3.0, 6.0, 3.0, 2.0])
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        oracle = vertex_oracle([1.0, 2.0, 3.0], np.zeros(3), np.full(3, 4.0),
                               A, ["<", "<", "<", "<"], [3.0, 6.0, 3.0, 2.0])
        assert sol.objective == pytest.approx(oracle, abs=1e-9)

    def test_finite_bounds_required(self):
        with pytest.raises(DomainError):
            make_lp([1.0], [0.0], [np.inf])


class TestOracleEquivalence:
    def test_random_lps_match_vertex_enumeration(self):
        rng = np.random.default_rng(0)
        checked_feasible = 0
        checked_infeasible = 0
        for _ in range(80):
            n, m = 5, 4
            c = rng.normal(0, 1, n)
            lb = rng.uniform(-2, 0, n)
            ub = lb + rng.uniform(0.5, 3, n)
            A = rng.normal(0, 1, (m, n))
            senses = rng.choice(["<", "=", ">"], m, p=[0.5, 0.2, 0.3])
            x0 = rng.uniform(lb, ub)
            rhs = A @ x0 + rng.normal(0, 0.5, m)
            oracle = vertex_oracle(c, lb, ub, A, senses, rhs)
            sol = solve_lp(make_lp(c, lb, ub, A, senses, rhs))
            if oracle is None:
                assert sol.status == "infeasible"
                checked_infeasible += 1
            else:
                assert sol.status == "optimal"
                assert sol.objective == pytest.approx(oracle, abs=1e-6)
                checked_feasible += 1
        assert checked_feasible >= 40
        assert checked_infeasible >= 5

    def test_vertex_solution_returned(self):
        # the solution must sit on a vertex: n tight constraints among bounds/rows
        rng = np.random.default_rng(1)
        n, m = 4, 3
        c = rng.normal(0, 1, n)
        lb, ub = np.zeros(n), np.full(n, 2.0)
        A = rng.normal(0, 1, (m, n))
        rhs = A @ rng.uniform(0, 2, n)
        sol = solve_lp(make_lp(c, lb, ub, A, ["<"] * m, rhs))
        assert sol.status == "optimal"
        tight = int(np.sum(np.abs(sol.x - lb) < 1e-7))
        tight += int(np.sum(np.abs(sol.x - ub) < 1e-7))
        tight += int(np.sum(np.abs(A @ sol.x - rhs) < 1e-7))
        assert tight >= n - 3  # basic solution: at least n - m tight bounds


class TestDeterminismAndWarm:
    def test_same_input_same_pivots(self):
        rng = np.random.default_rng(3)
        n, m = 8, 6
        c = rng.normal(0, 1, n)
        lb, ub = np.full(n, -1.0), np.full(n, 1.5)
        A = rng.normal(0, 1, (m, n))
        rhs = rng.normal(0, 1, m)
        lp = make_lp(c, lb, ub, A, ["<"] * m, rhs)
        s1 = solve_lp(lp)
        s2 = solve_lp(lp)
        assert s1.status == s2.status
        assert s1.iterations == s2.iterations
        if s1.status == "optimal":
            assert np.array_equal(s1.x, s2.x)

    def test_warm_start_agrees_with_cold(self):
        rng = np.random.default_rng(4)
        n, m = 10, 7
        A = rng.normal(0, 1, (m, n))
        lb, ub = np.zeros(n), np.full(n, 3.0)
        base_rhs = A @ rng.uniform(0, 3, n)
        lp1 = make_lp(rng.normal(0, 1, n), lb, ub, A, ["<"] * m, base_rhs)
        s1 = solve_lp(lp1)
        assert s1.status == "optimal"
        # perturb bounds (a branch-like change) and re-solve warm vs cold
        ub2 = ub.copy()
        ub2[0] = 0.0
        lp2 = make_lp(lp1.c, lb, ub2, A, ["<"] * m, base_rhs)
        warm = solve_lp(lp2, warm=s1.basis)
        cold = solve_lp(lp2)
        assert warm.status == cold.status == "optimal"
        assert warm.objective == pytest.approx(cold.objective, abs=1e-8)
        assert warm.iterations <= cold.iterations + 2
