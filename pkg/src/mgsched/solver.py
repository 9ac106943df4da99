"""Branch-and-bound MIP solver and the chunked heuristic for full months.

The LP relaxation replaces each buy/sell complementarity pair by its exact
concave envelope, the single cap row buy + sell <= line_max (the two forms
have identical relaxation optima, and branching a direction binary is then
just a pair of bound fixes). The grid-sell bonus makes simultaneous buy and
sell profitable in the relaxation on every line-hour, so trees on long
horizons do not close; a feasible incumbent is therefore constructed at the
root by fixing every line direction to the sign of the relaxation's net flow
and re-solving the LP. Search beyond that refines the incumbent within the
node budget; results are labeled optimal only when the gap is proven.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .demand import TariffSchedule
from .errors import DomainError, SolverError
from .lp import Basis, LinearProgram, LpSolution, SimplexSolver
from .model import (BinaryGroup, MonthlyInstance, ScheduleSolution,
                    build_horizon_instance, build_month_instance,
                    extract_solution, recompute_profits, validate_solution)
from .profiles import CovidFactorTable, HourlyProfile, MonthCalendar, covid_factor
from .system import ScenarioConfig, SystemSpec

BRUTE_FORCE_MAX_BINARIES = 24


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6
    optimality_gap: float = 1e-6          # relative
    node_limit: int = 100_000
    mode: str = "exact"                   # 'exact' | 'chunked'
    chunk_hours: int = 24
    trace_path: str | None = None

    def __post_init__(self):
        if min(self.feasibility_tol, self.integrality_tol, self.optimality_gap) <= 0:
            raise DomainError("tolerances must be > 0")
        if self.node_limit < 1:
            raise DomainError("node_limit must be >= 1")
        if self.mode not in ("exact", "chunked"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.chunk_hours < 1:
            raise DomainError("chunk_hours must be >= 1")


@dataclass
class MipResult:
    status: str                            # 'optimal' | 'infeasible' | 'node_limit'
    objective: float | None
    x: np.ndarray | None
    node_count: int
    bound: float | None
    infeasible_detail: str | None = None


class SolveContext:
    """Caches the simplex context and warm bases across structurally
    identical instances (consecutive chunk windows, consecutive months)."""

    def __init__(self):
        self._fingerprint = None
        self._solver: SimplexSolver | None = None
        self.root_basis: Basis | None = None
        self.fix_basis: Basis | None = None

    def solver_for(self, lp: LinearProgram) -> SimplexSolver:
        a = lp.a_matrix.tocsr() if lp.m else None
        if a is None:
            fp = ("rowless", lp.n)
        else:
            h = hashlib.sha1()
            h.update(a.indptr.tobytes())
            h.update(a.indices.tobytes())
            h.update(a.data.tobytes())
            h.update(lp.senses.tobytes())
            fp = (a.shape, h.hexdigest())
        if fp != self._fingerprint:
            self._fingerprint = fp
            self._solver = SimplexSolver(lp.n, a, lp.senses)
            self.root_basis = None
            self.fix_basis = None
        return self._solver


def _aggregated_lp(instance: MonthlyInstance) -> tuple[LinearProgram, int, int]:
    """Relaxation with complementarity row pairs folded into cap rows.

    Returns (lp, compl_start, n_cap_rows); original rows before compl_start
    keep their indices, risk rows follow the cap block.
    """
    lay = instance.layout
    n, T, nip = lay.n, lay.T, lay.nip
    compl_start = (2 * n + n * (n - 1)) * T
    risk_start = compl_start + (2 * n + 4 * nip) * T
    a = instance.a_matrix
    line_groups = [g for g in instance.binaries if g.kind in ("grid", "pair")]
    ncap = len(line_groups)
    rows = np.repeat(np.arange(ncap), 2)
    cols = np.empty(2 * ncap, dtype=np.int64)
    caps = np.empty(ncap)
    for i, g in enumerate(line_groups):
        cols[2 * i] = g.measure_cols[0]
        cols[2 * i + 1] = g.measure_cols[1]
        caps[i] = g.cap
    cap_block = sp.csr_matrix((np.ones(2 * ncap), (rows, cols)),
                              shape=(ncap, lay.ncols))
    parts = [a[:compl_start], cap_block]
    senses = [instance.senses[:compl_start], np.full(ncap, "<", dtype="U1")]
    rhs = [instance.rhs[:compl_start], caps]
    if instance.include_risk:
        parts.append(a[risk_start:])
        senses.append(instance.senses[risk_start:])
        rhs.append(instance.rhs[risk_start:])
    lp = LinearProgram(c=instance.c.copy(), lb=instance.lb.copy(),
                       ub=instance.ub.copy(),
                       a_matrix=sp.vstack(parts, format="csr"),
                       senses=np.concatenate(senses), rhs=np.concatenate(rhs))
    return lp, compl_start, ncap


def _agg_row_label(instance: MonthlyInstance, row: int, compl_start: int,
                   ncap: int) -> str:
    if row < compl_start:
        return instance.row_label(row)
    if row < compl_start + ncap:
        line_groups = [g for g in instance.binaries if g.kind in ("grid", "pair")]
        return f"line_cap({line_groups[row - compl_start].label})"
    lay = instance.layout
    risk_start = compl_start + (2 * lay.n + 4 * lay.nip) * lay.T
    return instance.row_label(risk_start + (row - compl_start - ncap))


def _group_fraction(g: BinaryGroup, x: np.ndarray) -> float:
    """Distance of a binary group from an integral direction, in [0, 0.5]."""
    if g.kind == "flag":
        v = x[g.x_col]
        return float(min(abs(v), abs(1.0 - v)))
    if g.cap <= 0:
        return 0.0
    a, b = g.measure_cols
    return float(min(x[a], x[b]) / g.cap)


def _apply_direction(lb: np.ndarray, ub: np.ndarray, g: BinaryGroup, value: int):
    """Pin a binary group to a direction by bound fixes."""
    if g.kind == "flag":
        lb[g.x_col] = ub[g.x_col] = float(value)
        return
    blocked = g.blocked_at_one if value == 1 else g.blocked_at_zero
    for col in blocked:
        ub[col] = 0.0
    lb[g.x_col] = ub[g.x_col] = float(value)


def _assign_binaries(instance: MonthlyInstance, x: np.ndarray,
                     tol: float) -> np.ndarray:
    """Overwrite binary columns with integral values consistent with the flows."""
    out = x.copy()
    for g in instance.binaries:
        if g.kind == "flag":
            out[g.x_col] = float(round(min(max(x[g.x_col], 0.0), 1.0)))
            continue
        one_side, zero_side = g.measure_cols
        if x[one_side] > tol:
            out[g.x_col] = 1.0
        elif x[zero_side] > tol:
            out[g.x_col] = 0.0
        else:
            lo, hi = instance.lb[g.x_col], instance.ub[g.x_col]
            out[g.x_col] = lo if lo == hi else 0.0
    return out


def _settle_risk(instance: MonthlyInstance, x: np.ndarray, tol: float) -> np.ndarray | None:
    """Set risk/W columns to their forced values given the flows.

    Returns None when the hard EDR cap cannot be met for some SMG.
    """
    if not instance.include_risk:
        return x
    lay = instance.layout
    n, T = lay.n, lay.T
    buy = np.zeros((n, n, T))
    sell = np.zeros((n, n, T))
    for z in range(n):
        for y in range(n):
            buy[z, y] = x[lay.buy(z, y, 0): lay.buy(z, y, 0) + T]
            sell[z, y] = x[lay.sell(z, y, 0): lay.sell(z, y, 0) + T]
    of = recompute_profits(instance, buy, sell)
    out = x.copy()
    for z in range(n):
        shortfall = max(0.0, instance.spec.target[z] - of[z])
        if instance.edr_mode == "hard" and shortfall > instance.spec.edr_cap + tol:
            return None
        out[lay.risk(z)] = shortfall
        out[lay.w(z)] = 1.0 if of[z] < instance.spec.target[z] else 0.0
    return out


def solve_mip(instance: MonthlyInstance, opts: SolverOptions | None = None,
              context: SolveContext | None = None) -> MipResult:
    """Branch and bound over the aggregated relaxation.

    Depth-first with best-bound pruning; branches the most fractional binary
    group (ties: lowest variable index). A direction-fixing incumbent is
    built at the root before any branching. Deterministic throughout.
    """
    opts = opts or SolverOptions()
    ctx = context or SolveContext()
    lp, compl_start, ncap = _aggregated_lp(instance)
    solver = ctx.solver_for(lp)
    trace = open(opts.trace_path, "w") if opts.trace_path else None
    try:
        return _branch_and_bound(instance, opts, ctx, solver, lp,
                                 compl_start, ncap, trace)
    finally:
        if trace:
            trace.close()


def _branch_and_bound(instance, opts, ctx, solver, lp, compl_start, ncap, trace):
    int_tol = opts.integrality_tol
    root = solver.solve(lp.c, lp.rhs, lp.lb, lp.ub, warm=ctx.root_basis,
                        feas_tol=opts.feasibility_tol)
    nodes = 1
    if root.status == "infeasible":
        detail = "infeasible relaxation"
        if root.infeasible_row is not None:
            detail += f" at {_agg_row_label(instance, root.infeasible_row, compl_start, ncap)}"
        return MipResult("infeasible", None, None, nodes, None, detail)
    ctx.root_basis = root.basis

    incumbent_x = None
    incumbent_obj = -np.inf

    def try_accept(x: np.ndarray) -> bool:
        nonlocal incumbent_x, incumbent_obj
        settled = _settle_risk(instance, _assign_binaries(instance, x, int_tol),
                               int_tol)
        if settled is None:
            return False
        obj = float(instance.c @ settled)
        if obj > incumbent_obj + 1e-12:
            incumbent_obj = obj
            incumbent_x = settled
            return True
        return False

    fracs = [ _group_fraction(g, root.x) for g in instance.binaries ]
    if max(fracs, default=0.0) <= int_tol:
        if try_accept(root.x):
            result = _final(instance, opts, "optimal", incumbent_x, incumbent_obj,
                            nodes, root.objective)
            return result

    # root heuristic: pin every line direction to the relaxation's net flow
    hlb, hub = lp.lb.copy(), lp.ub.copy()
    for g in instance.binaries:
        if g.kind == "flag":
            continue
        one_side, zero_side = g.measure_cols
        net = root.x[one_side] - root.x[zero_side]
        _apply_direction(hlb, hub, g, 1 if net > int_tol else 0)
    heur = solver.solve(lp.c, lp.rhs, hlb, hub,
                        warm=ctx.fix_basis or root.basis,
                        feas_tol=opts.feasibility_tol)
    if heur.status == "optimal":
        ctx.fix_basis = heur.basis
        flag_ok = all(_group_fraction(g, heur.x) <= int_tol
                      for g in instance.binaries if g.kind == "flag")
        if flag_ok:
            try_accept(heur.x)
        else:
            # settle W by branching would be overkill: W is forced once the
            # flows are known, so assign and re-check feasibility directly
            try_accept(heur.x)
    if trace:
        trace.write(f"root bound={root.objective:.9g} "
                    f"heuristic={incumbent_obj:.9g}\n")

    # depth-first stack of (bound, depth, lb, ub, warm)
    stack = [(root.objective, 0, lp.lb, lp.ub, root.basis, root)]
    max_pruned = -np.inf
    proven = True
    while stack:
        if nodes >= opts.node_limit:
            proven = False
            break
        bound, depth, nlb, nub, warm, sol = stack.pop()
        gap_abs = max(opts.optimality_gap * max(1.0, abs(incumbent_obj)), 1e-12)
        if incumbent_x is not None and bound <= incumbent_obj + gap_abs:
            max_pruned = max(max_pruned, bound)
            continue
        if sol is None:
            sol = solver.solve(lp.c, lp.rhs, nlb, nub, warm=warm,
                               feas_tol=opts.feasibility_tol)
            nodes += 1
            if sol.status == "infeasible":
                continue
            bound = sol.objective
            if incumbent_x is not None and bound <= incumbent_obj + gap_abs:
                max_pruned = max(max_pruned, bound)
                continue
        # weak-duality sentinel: the tree bound can never drop below the incumbent
        if incumbent_x is not None and bound < incumbent_obj - 1e-6 * max(1.0, abs(bound)):
            raise SolverError("branch-and-bound invariant violated: "
                              f"node bound {bound} below incumbent {incumbent_obj}")
        fracs = [(_group_fraction(g, sol.x), g) for g in instance.binaries]
        worst = max(fracs, key=lambda fg: (fg[0], -fg[1].x_col))
        if worst[0] <= opts.integrality_tol:
            try_accept(sol.x)
            continue
        g = _pick_branch_group(fracs, opts.integrality_tol)
        if g.kind == "flag":
            prefer = 1 if sol.x[g.x_col] >= 0.5 else 0
        else:
            one_side, zero_side = g.measure_cols
            prefer = 1 if sol.x[one_side] >= sol.x[zero_side] else 0
        if trace:
            trace.write(f"node depth={depth} bound={bound:.9g} "
                        f"branch={g.label} prefer={prefer}\n")
        for value in (1 - prefer, prefer):       # preferred child popped first
            clb, cub = nlb.copy(), nub.copy()
            _apply_direction(clb, cub, g, value)
            stack.append((bound, depth + 1, clb, cub, sol.basis, None))

    if incumbent_x is None:
        if proven:
            return MipResult("infeasible", None, None, nodes, None,
                             "all branches infeasible")
        return MipResult("node_limit", None, None, nodes,
                         max(max_pruned, *(s[0] for s in stack), -np.inf)
                         if stack or max_pruned > -np.inf else None,
                         "node limit reached without incumbent")
    if proven:
        bound = max(incumbent_obj, max_pruned)
        return _final(instance, opts, "optimal", incumbent_x, incumbent_obj,
                      nodes, bound)
    bound = max([incumbent_obj, max_pruned] + [s[0] for s in stack])
    return _final(instance, opts, "node_limit", incumbent_x, incumbent_obj,
                  nodes, bound)


def _pick_branch_group(fracs, tol) -> BinaryGroup:
    """Most fractional group; ties broken by lowest binary column index."""
    best = None
    for f, g in fracs:
        if f <= tol:
            continue
        key = (-f, g.x_col)
        if best is None or key < best[0]:
            best = (key, g)
    return best[1]


def _final(instance, opts, status, x, obj, nodes, bound) -> MipResult:
    sol = extract_solution(instance, x)
    report = validate_solution(instance, sol, tol=1e-6)
    if not report.ok:
        raise SolverError("solver produced an invalid solution:\n" + report.summary())
    if status == "optimal" and bound is not None:
        if abs(obj - bound) > max(opts.optimality_gap * max(1.0, abs(obj)), 1e-9):
            status = "node_limit"   # cannot certify the gap; stay honest
    return MipResult(status, obj, x, nodes, bound)


def brute_force_mip(instance: MonthlyInstance, opts: SolverOptions | None = None) -> MipResult:
    """Exhaustive oracle: enumerate every binary assignment on the literal rows.

    Independent of the aggregated relaxation and of branch and bound; only
    usable on tiny instances (binary count capped at 24).
    """
    opts = opts or SolverOptions()
    groups = instance.binaries
    k = len(groups)
    if k > BRUTE_FORCE_MAX_BINARIES:
        raise DomainError(f"brute force limited to {BRUTE_FORCE_MAX_BINARIES} "
                          f"binaries, instance has {k}")
    lp = LinearProgram(c=instance.c.copy(), lb=instance.lb.copy(),
                       ub=instance.ub.copy(), a_matrix=instance.a_matrix,
                       senses=instance.senses, rhs=instance.rhs)
    solver = SimplexSolver.for_lp(lp)
    best_obj = -np.inf
    best_x = None
    warm = None
    count = 0
    for assignment in itertools.product((0, 1), repeat=k):
        count += 1
        lb, ub = lp.lb.copy(), lp.ub.copy()
        feasible_bounds = True
        for g, v in zip(groups, assignment):
            if lb[g.x_col] > v or ub[g.x_col] < v:   # respect pre-fixed binaries
                feasible_bounds = False
                break
            _apply_direction(lb, ub, g, v)
        if not feasible_bounds:
            continue
        sol = solver.solve(lp.c, lp.rhs, lb, ub, warm=warm,
                           feas_tol=opts.feasibility_tol)
        if sol.status != "optimal":
            continue
        warm = sol.basis
        if sol.objective > best_obj + 1e-12:
            best_obj = sol.objective
            best_x = sol.x.copy()
    if best_x is None:
        return MipResult("infeasible", None, None, count, None,
                         "no binary assignment is feasible")
    return MipResult("optimal", float(best_obj), best_x, count, float(best_obj))


# ---------------------------------------------------------------------------
# chunked month solving


@dataclass
class MonthSolveResult:
    status: str                            # 'optimal' | 'heuristic' | 'infeasible'
    solution: ScheduleSolution | None
    objective: float | None
    bound: float | None                    # None when no sound bound exists
    node_count: int
    detail: str | None = None


def _windows(total: int, chunk: int) -> list[tuple[int, int]]:
    out = []
    t = 0
    while t < total:
        out.append((t, min(t + chunk, total)))
        t += chunk
    return out


def solve_month(spec: SystemSpec, scenario: ScenarioConfig, calendar: MonthCalendar,
                profiles: dict[tuple[str, int], HourlyProfile],
                tariff: TariffSchedule, cvd_table: CovidFactorTable,
                initial_soc: np.ndarray, opts: SolverOptions,
                context: SolveContext | None = None) -> MonthSolveResult:
    """Solve one month in the configured mode (exact or chunked)."""
    if opts.mode == "chunked" and opts.chunk_hours < calendar.hours:
        return solve_month_chunked(spec, scenario, calendar, profiles, tariff,
                                   cvd_table, initial_soc, opts, context)
    instance = build_month_instance(spec, scenario, calendar, profiles, tariff,
                                    cvd_table, initial_soc)
    res = solve_mip(instance, opts, context)
    if res.status == "infeasible":
        return MonthSolveResult("infeasible", None, None, None, res.node_count,
                                f"month {calendar.month_index}: {res.infeasible_detail}")
    sol = extract_solution(instance, res.x, heuristic=(res.status == "node_limit"))
    status = "optimal" if res.status == "optimal" else "heuristic"
    return MonthSolveResult(status, sol, res.objective, res.bound, res.node_count)


def solve_month_chunked(spec: SystemSpec, scenario: ScenarioConfig,
                        calendar: MonthCalendar,
                        profiles: dict[tuple[str, int], HourlyProfile],
                        tariff: TariffSchedule, cvd_table: CovidFactorTable,
                        initial_soc: np.ndarray, opts: SolverOptions,
                        context: SolveContext | None = None) -> MonthSolveResult:
    """Heuristic month solve: fixed-length windows with SOC carried across.

    Each window's MIP is solved under the node budget; the stitched month is
    feasible and lower-bounds the exact optimum, and is labeled heuristic.
    Downside risk is settled after stitching from the monthly profits.
    """
    m, T, n = calendar.month_index, calendar.hours, spec.n_smg
    if opts.chunk_hours >= T:
        return solve_month(spec, scenario, calendar, profiles, tariff, cvd_table,
                           initial_soc, replace(opts, mode="exact"), context)
    month_inst = build_month_instance(spec, scenario, calendar, profiles, tariff,
                                      cvd_table, initial_soc)
    ctx = context or SolveContext()
    soc = np.asarray(initial_soc, dtype=float).copy()
    pieces: list[ScheduleSolution] = []
    nodes = 0
    windows = _windows(T, opts.chunk_hours)
    for w_i, (t0, t1) in enumerate(windows):
        last = w_i == len(windows) - 1
        terminal = scenario.terminal_soc_rule if last else "free"
        inst = build_horizon_instance(
            spec, scenario.architecture, month=m,
            load=month_inst.load[:, t0:t1], pv_max=month_inst.pv_max[:, t0:t1],
            wt_max=month_inst.wt_max[:, t0:t1],
            buy_price=month_inst.buy_price[t0:t1],
            sell_grid_price=month_inst.sell_grid_price[t0:t1],
            sell_int_price=month_inst.sell_int_price[t0:t1],
            cvd=month_inst.cvd, initial_soc=soc, include_risk=False,
            edr_mode=scenario.edr_mode, terminal_soc_rule=terminal,
            hour_offset=t0)
        res = solve_mip(inst, opts, ctx)
        nodes += res.node_count
        if res.status == "infeasible":
            return MonthSolveResult(
                "infeasible", None, None, None, nodes,
                f"month {m}, window hours {t0 + 1}-{t1}: {res.infeasible_detail}")
        pieces.append(extract_solution(inst, res.x))
        soc = pieces[-1].final_soc

    sol = _stitch(month_inst, pieces)
    if sol is None:
        z_bad = int(np.argmax(np.maximum(
            0.0, np.asarray(spec.target[:n]) - _stitch_profits(month_inst, pieces))))
        return MonthSolveResult(
            "infeasible", None, None, None, nodes,
            f"month {m}: downside risk of SMG {z_bad + 1} exceeds the hard EDR cap")
    report = validate_solution(month_inst, sol, tol=1e-6)
    if not report.ok:
        raise SolverError("chunked month failed validation:\n" + report.summary())
    return MonthSolveResult("heuristic", sol, sol.objective, None, nodes)


def _stitch_profits(month_inst: MonthlyInstance, pieces) -> np.ndarray:
    buy = np.concatenate([p.buy for p in pieces], axis=2)
    sell = np.concatenate([p.sell for p in pieces], axis=2)
    return recompute_profits(month_inst, buy, sell)


def _stitch(month_inst: MonthlyInstance, pieces) -> ScheduleSolution | None:
    spec = month_inst.spec
    n = month_inst.n_smg
    cat2 = lambda attr: np.concatenate([getattr(p, attr) for p in pieces], axis=1)
    cat3 = lambda attr: np.concatenate([getattr(p, attr) for p in pieces], axis=2)
    of = _stitch_profits(month_inst, pieces)
    target = np.asarray(spec.target[:n])
    risk = np.maximum(0.0, target - of)
    if month_inst.edr_mode == "hard" and np.any(risk > spec.edr_cap + 1e-9):
        return None
    return ScheduleSolution(
        month=month_inst.month, hours=month_inst.hours, hour_offset=0,
        pv=cat2("pv"), wt=cat2("wt"), bat=cat2("bat"), soc=cat2("soc"),
        buy=cat3("buy"), sell=cat3("sell"), x=cat3("x"), of=of, risk=risk,
        w=(of < target).astype(float), objective=float(of.sum()), heuristic=True)
