"""Bounded-variable dual simplex for the LPs behind the scheduling MIP.

Maximizes c'x subject to row constraints with {<=, =, >=} senses and finite
box bounds on every structural variable. One slack per row turns every
constraint into an equality; slack bounds encode the sense. The algorithm
keeps dual feasibility as its invariant: any basis can be made dual feasible
by flipping nonbasic variables between their (finite) bounds, which is what
makes warm starts after bound or objective changes cheap inside branch and
bound.

Primal infeasibility at dual-simplex termination certifies an infeasible LP.
Anti-cycling: after a stall, pivot selection switches to least-index rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SolverNumericsError

NB_LO, NB_UP, BASIC = 0, 1, 2

_PIV_TOL = 1e-8
_DUAL_TOL = 1e-9
_RATIO_TIE = 1e-9
_STALL_LIMIT = 200
_REFACTOR_EVERY = 120
_MAX_DENSE_ROWS = 6000


@dataclass
class LinearProgram:
    """maximize c'x  s.t.  A x {<=,=,>=} rhs,  lb <= x <= ub (all finite)."""

    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    a_matrix: sp.spmatrix | None
    senses: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.senses = np.asarray(self.senses, dtype="U1")
        n = len(self.c)
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise DomainError("bound arrays do not match objective length")
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise DomainError("all variable bounds must be finite")
        if np.any(self.lb > self.ub + 1e-12):
            j = int(np.argmax(self.lb - self.ub))
            raise DomainError(f"lb > ub for variable {j}")
        m = len(self.rhs)
        if self.senses.shape != (m,):
            raise DomainError("senses and rhs lengths differ")
        if m > 0:
            if self.a_matrix is None or self.a_matrix.shape != (m, n):
                raise DomainError(f"constraint matrix must be {m}x{n}")
        if not set(self.senses.tolist()) <= {"<", "=", ">"}:
            raise DomainError("senses must be '<', '=' or '>'")

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.rhs)


@dataclass
class Basis:
    head: np.ndarray   # (m,) variable index per basic row
    vstat: np.ndarray  # (n + m,) NB_LO / NB_UP / BASIC

    def copy(self) -> "Basis":
        return Basis(self.head.copy(), self.vstat.copy())


@dataclass
class LpSolution:
    status: str                     # 'optimal' | 'infeasible'
    objective: float | None
    x: np.ndarray | None            # structural variables
    basis: Basis | None
    iterations: int
    infeasible_row: int | None = None


class SimplexSolver:
    """Reusable solver context for one constraint matrix and sense pattern.

    Objective, right-hand side and bounds are passed per solve, so
    branch-and-bound nodes, objective variants and structurally identical
    instances (consecutive chunk windows) share the factorization machinery
    and warm bases.
    """

    def __init__(self, n: int, a_matrix: sp.spmatrix | None, senses: np.ndarray):
        self.n = n
        self.senses = np.asarray(senses, dtype="U1")
        self.m = len(self.senses)
        if self.m > _MAX_DENSE_ROWS:
            raise SolverNumericsError(
                f"LP has {self.m} rows; the dense-basis simplex is limited to "
                f"{_MAX_DENSE_ROWS} (use chunked mode for large horizons)")
        self.N = self.n + self.m
        if self.m > 0:
            a_csr = a_matrix.tocsr()
            self._acsr = a_csr
            self._at_csr = a_csr.T.tocsr()
            a_csc = a_csr.tocsc()
            self._cind = a_csc.indices
            self._cptr = a_csc.indptr
            self._cdat = a_csc.data
        # warm-start fast path: inverse of the most recent final basis
        self._cache_head: np.ndarray | None = None
        self._cache_binv: np.ndarray | None = None

    @classmethod
    def for_lp(cls, lp: LinearProgram) -> "SimplexSolver":
        return cls(lp.n, lp.a_matrix, lp.senses)

    # -- column of the augmented matrix [A | I]
    def _col(self, j: int) -> np.ndarray:
        u = np.zeros(self.m)
        if j < self.n:
            s, e = self._cptr[j], self._cptr[j + 1]
            u[self._cind[s:e]] = self._cdat[s:e]
        else:
            u[j - self.n] = 1.0
        return u

    def _basis_matrix(self, head: np.ndarray) -> np.ndarray:
        b = np.empty((self.m, self.m))
        for i, j in enumerate(head):
            b[:, i] = self._col(int(j))
        return b

    def solve(self, c: np.ndarray, rhs: np.ndarray, lb: np.ndarray,
              ub: np.ndarray, warm: Basis | None = None, feas_tol: float = 1e-7,
              max_iter: int | None = None) -> LpSolution:
        n, m, N = self.n, self.m, self.N
        rhs = np.asarray(rhs, dtype=float)
        c_full = np.zeros(N)
        c_full[:n] = np.asarray(c, dtype=float)
        scale = float(max(np.max(np.abs(rhs), initial=1.0),
                          np.max(np.abs(ub), initial=1.0),
                          np.max(np.abs(lb), initial=1.0)))
        slack_big = max(1e7, 1e4 * scale)
        s_lb = np.zeros(m)
        s_ub = np.zeros(m)
        s_lb[self.senses == ">"] = -slack_big
        s_ub[self.senses == "<"] = slack_big
        lbf = np.concatenate([lb, s_lb])
        ubf = np.concatenate([ub, s_ub])
        if np.any(lbf > ubf + 1e-12):
            return LpSolution("infeasible", None, None, None, 0,
                              infeasible_row=None)

        if m == 0:
            x = np.where(c_full[:n] > 0, ub, lb)
            return LpSolution("optimal", float(c_full[:n] @ x), x,
                              Basis(np.empty(0, dtype=np.int64),
                                    np.full(N, NB_LO, dtype=np.int8)), 0)

        head, vstat, binv = self._init_basis(warm)
        if binv is None:
            head, vstat = self._cold_basis(c_full)
            binv = np.eye(m)

        if max_iter is None:
            max_iter = 5000 + 40 * N
        free_mask = (ubf - lbf) > 1e-14

        it = 0
        bland = False
        stall = 0
        best_viol = np.inf
        refac_age = 0
        repairs = 0
        while True:
            # duals and reduced costs for the current basis
            y = c_full[head] @ binv
            d = np.empty(N)
            d[:n] = c_full[:n] - (self._at_csr @ y)
            d[n:] = c_full[n:] - y

            # restore dual feasibility by bound flips (cheap: all bounds finite)
            nb = vstat != BASIC
            flip_up = nb & (vstat == NB_LO) & (d > _DUAL_TOL) & free_mask
            flip_lo = nb & (vstat == NB_UP) & (d < -_DUAL_TOL) & free_mask
            vstat[flip_up] = NB_UP
            vstat[flip_lo] = NB_LO

            # primal values
            x_full = np.where(vstat == NB_UP, ubf, lbf)
            x_full[head] = 0.0
            resid = rhs - self._acsr @ x_full[:n] - x_full[n:]
            x_b = binv @ resid
            x_full[head] = x_b

            lo_gap = lbf[head] - x_b
            up_gap = x_b - ubf[head]
            viol = np.maximum(np.maximum(lo_gap, up_gap), 0.0)
            vmax = float(viol.max(initial=0.0))
            if vmax <= feas_tol:
                self._cache_head = head.copy()
                self._cache_binv = binv.copy()
                return self._finish(c_full, rhs, lbf, ubf, head, vstat,
                                    x_full, it)

            if vmax < best_viol - 1e-12:
                best_viol = vmax
                stall = 0
            else:
                stall += 1
                if stall > _STALL_LIMIT:
                    bland = True

            if it >= max_iter:
                raise SolverNumericsError(
                    f"dual simplex exceeded {max_iter} iterations "
                    f"(m={m}, n={n}, viol={vmax:.3e})")

            # leaving row: worst violation (or least basic index when stalled)
            violated = viol > feas_tol
            if bland:
                rows = np.nonzero(violated)[0]
                r = int(rows[np.argmin(head[rows])])
            else:
                r = int(np.argmax(viol))
            below = x_b[r] < lbf[head[r]]

            rho = binv[r]
            alpha = np.empty(N)
            alpha[:n] = self._at_csr @ rho
            alpha[n:] = rho

            if below:
                elig = (vstat != BASIC) & free_mask & (
                    ((vstat == NB_LO) & (alpha < -_PIV_TOL))
                    | ((vstat == NB_UP) & (alpha > _PIV_TOL)))
            else:
                elig = (vstat != BASIC) & free_mask & (
                    ((vstat == NB_LO) & (alpha > _PIV_TOL))
                    | ((vstat == NB_UP) & (alpha < -_PIV_TOL)))
            cand = np.nonzero(elig)[0]
            if cand.size == 0:
                self._cache_head = head.copy()
                self._cache_binv = binv.copy()
                return LpSolution("infeasible", None, None,
                                  Basis(head.copy(), vstat.copy()), it,
                                  infeasible_row=r)

            ratios = d[cand] / alpha[cand]
            if not below:
                ratios = -ratios
            rmin = float(ratios.min())
            near = cand[ratios <= rmin + _RATIO_TIE]
            if bland:
                q = int(near.min())
            else:
                q = int(near[np.argmax(np.abs(alpha[near]))])

            u = binv @ self._col(q)
            piv = u[r]
            if abs(piv) < _PIV_TOL or abs(piv - alpha[q]) > 1e-6 * max(1.0, abs(alpha[q])):
                # factorization drift: rebuild the inverse and retry this step
                if repairs >= 5:
                    raise SolverNumericsError(
                        f"unstable pivot (|piv|={abs(piv):.2e}) after {repairs} repairs")
                repairs += 1
                binv = self._refactor(head)
                refac_age = 0
                continue

            leave = int(head[r])
            vstat[leave] = NB_LO if below else NB_UP
            vstat[q] = BASIC
            head[r] = q
            br = binv[r] / piv
            u[r] = 0.0
            binv -= np.outer(u, br)
            binv[r] = br

            it += 1
            refac_age += 1
            if refac_age >= _REFACTOR_EVERY:
                binv = self._refactor(head)
                refac_age = 0

    # -- helpers -----------------------------------------------------------

    def _cold_basis(self, c_full: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        head = np.arange(self.n, self.N, dtype=np.int64)
        vstat = np.full(self.N, NB_LO, dtype=np.int8)
        vstat[:self.n][c_full[:self.n] > 0] = NB_UP
        vstat[head] = BASIC
        return head, vstat

    def _init_basis(self, warm: Basis | None):
        if warm is None:
            return None, None, None
        head = warm.head.astype(np.int64, copy=True)
        vstat = warm.vstat.astype(np.int8, copy=True)
        if (head.shape != (self.m,) or vstat.shape != (self.N,)
                or len(np.unique(head)) != self.m
                or np.any(head < 0) or np.any(head >= self.N)):
            return None, None, None
        check = np.full(self.N, False)
        check[head] = True
        if not np.array_equal(check, vstat == BASIC):
            return None, None, None
        if self._cache_head is not None and np.array_equal(self._cache_head, head):
            return head, vstat, self._cache_binv.copy()
        try:
            binv = np.linalg.inv(self._basis_matrix(head))
        except np.linalg.LinAlgError:
            return None, None, None
        if not np.all(np.isfinite(binv)):
            return None, None, None
        return head, vstat, binv

    def _refactor(self, head: np.ndarray) -> np.ndarray:
        try:
            binv = np.linalg.inv(self._basis_matrix(head))
        except np.linalg.LinAlgError as exc:
            raise SolverNumericsError("basis matrix became singular") from exc
        if not np.all(np.isfinite(binv)):
            raise SolverNumericsError("basis inverse overflowed")
        return binv

    def _finish(self, c_full, rhs, lbf, ubf, head, vstat, x_full,
                it) -> LpSolution:
        # exact recheck against the original rows before reporting optimal
        x = x_full[:self.n]
        ax = self._acsr @ x
        sl = self.senses
        bad = ((sl == "<") & (ax > rhs + 1e-5)
               | (sl == ">") & (ax < rhs - 1e-5)
               | (sl == "=") & (np.abs(ax - rhs) > 1e-5))
        if np.any(bad) or np.any(x < lbf[:self.n] - 1e-6) or np.any(x > ubf[:self.n] + 1e-6):
            raise SolverNumericsError(
                f"solution failed the final feasibility audit "
                f"(rows={int(np.sum(bad))})")
        obj = float(c_full[:self.n] @ x)
        return LpSolution("optimal", obj, x.copy(),
                          Basis(head.copy(), vstat.copy()), it)


def solve_lp(lp: LinearProgram, feas_tol: float = 1e-7,
             warm: Basis | None = None, max_iter: int | None = None) -> LpSolution:
    """Solve one LP from scratch (or from a warm basis). Deterministic.

    Falls back to a cold start if a warm basis turns out unusable.
    """
    solver = SimplexSolver.for_lp(lp)
    try:
        return solver.solve(lp.c, lp.rhs, lp.lb, lp.ub, warm=warm,
                            feas_tol=feas_tol, max_iter=max_iter)
    except SolverNumericsError:
        if warm is None:
            raise
        return solver.solve(lp.c, lp.rhs, lp.lb, lp.ub, warm=None,
                            feas_tol=feas_tol, max_iter=max_iter)
