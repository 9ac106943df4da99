"""Monthly MIP assembly and independent solution validation.

Variables per SMG z and hour t: renewable outputs (pv, wt), battery power
(positive = discharge), state of charge, and per ordered line (z, y) the
bought and sold power plus the buy/sell direction binaries. Internal lines
share one binary per unordered pair: X for (z, y) with z < y means "z buys
from y", and the reverse direction uses its complement, which together with
the trade-symmetry equalities keeps both directions consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .demand import TariffSchedule
from .errors import BuildError, DomainError
from .profiles import (CovidFactorTable, HourlyProfile, MONTH_HOURS,
                       MonthCalendar, covid_factor, month_slice)
from .system import ScenarioConfig, SystemSpec

BIG_M_FACTOR = 10.0


@dataclass(frozen=True)
class VarLayout:
    """Column layout of one instance (0-based SMG index z, hour index t)."""

    n: int
    T: int
    include_risk: bool

    @property
    def npair(self) -> int:
        return self.n * self.n

    @property
    def nip(self) -> int:
        return self.n * (self.n - 1) // 2

    def _zt(self, base: int, z: int, t: int) -> int:
        return base + z * self.T + t

    def pv(self, z, t): return self._zt(0, z, t)
    def wt(self, z, t): return self._zt(self.n * self.T, z, t)
    def bat(self, z, t): return self._zt(2 * self.n * self.T, z, t)
    def soc(self, z, t): return self._zt(3 * self.n * self.T, z, t)

    def buy(self, z, y, t):
        return 4 * self.n * self.T + (z * self.n + y) * self.T + t

    def sell(self, z, y, t):
        return (4 * self.n + self.npair) * self.T + (z * self.n + y) * self.T + t

    def x_grid(self, z, t):
        return (4 * self.n + 2 * self.npair) * self.T + z * self.T + t

    def x_pair(self, q, t):
        return (5 * self.n + 2 * self.npair) * self.T + q * self.T + t

    @property
    def _after_time_blocks(self) -> int:
        return (5 * self.n + 2 * self.npair + self.nip) * self.T

    def risk(self, z):
        return self._after_time_blocks + z

    def w(self, z):
        return self._after_time_blocks + self.n + z

    @property
    def ncols(self) -> int:
        return self._after_time_blocks + (2 * self.n if self.include_risk else 0)

    def internal_pairs(self) -> list[tuple[int, int]]:
        return [(z, y) for z in range(self.n) for y in range(z + 1, self.n)]

    def ordered_internal(self) -> list[tuple[int, int]]:
        return [(z, y) for z in range(self.n) for y in range(self.n) if z != y]


@dataclass(frozen=True)
class BinaryGroup:
    """One direction binary with the trade columns it gates.

    kind: 'grid' (one line), 'pair' (shared binary of an internal pair) or
    'flag' (the downside-risk indicator W). When the binary is 1 the columns
    in blocked_at_one must be zero; when 0 those in blocked_at_zero.
    measure_cols hold the two one-directional flow columns whose overlap
    min(f, g)/cap measures how far the group is from an integral direction.
    """

    kind: str
    x_col: int
    label: str
    cap: float = 0.0
    blocked_at_one: tuple[int, ...] = ()
    blocked_at_zero: tuple[int, ...] = ()
    measure_cols: tuple[int, int] | None = None   # (X=1 side flow, X=0 side flow)


@dataclass
class MonthlyInstance:
    """Assembled MIP of one month (or window) and one scenario."""

    spec: SystemSpec
    architecture: str
    month: int
    hours: int
    hour_offset: int
    cvd: float
    include_risk: bool
    edr_mode: str
    terminal_soc_rule: str
    initial_soc: np.ndarray          # (n,)
    load: np.ndarray                 # (n, T)
    pv_max: np.ndarray               # (n, T)
    wt_max: np.ndarray               # (n, T)
    buy_price: np.ndarray            # (T,)
    sell_grid_price: np.ndarray      # (T,)
    sell_int_price: np.ndarray       # (T,)
    big_m: float
    layout: VarLayout
    c: np.ndarray                    # objective, maximize
    lb: np.ndarray
    ub: np.ndarray
    a_matrix: sp.csr_matrix
    senses: np.ndarray               # '<', '=', '>' per row
    rhs: np.ndarray
    binaries: list[BinaryGroup]

    @property
    def n_smg(self) -> int:
        return self.layout.n

    @property
    def ncols(self) -> int:
        return self.layout.ncols

    @property
    def nrows(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def binary_cols(self) -> list[int]:
        return [g.x_col for g in self.binaries]

    def var_name(self, col: int) -> str:
        lay = self.layout
        n, T = lay.n, lay.T
        blocks = [("pv", 0), ("wt", n * T), ("bat", 2 * n * T), ("soc", 3 * n * T)]
        for name, base in blocks:
            if base <= col < base + n * T:
                off = col - base
                return f"{name}_{off // T + 1}_{off % T + 1}"
        base = 4 * n * T
        if col < base + lay.npair * T:
            off = col - base
            p, t = divmod(off, T)
            return f"buy_{p // n + 1}{p % n + 1}_{t + 1}"
        base += lay.npair * T
        if col < base + lay.npair * T:
            off = col - base
            p, t = divmod(off, T)
            return f"sell_{p // n + 1}{p % n + 1}_{t + 1}"
        base += lay.npair * T
        if col < base + n * T:
            off = col - base
            return f"xg_{off // T + 1}_{off % T + 1}"
        base += n * T
        if col < base + lay.nip * T:
            off = col - base
            q, t = divmod(off, T)
            z, y = lay.internal_pairs()[q]
            return f"xp_{z + 1}{y + 1}_{t + 1}"
        base += lay.nip * T
        if col < base + n:
            return f"risk_{col - base + 1}"
        return f"w_{col - base - n + 1}"

    def row_label(self, row: int) -> str:
        lay = self.layout
        n, T = lay.n, lay.T
        if row < n * T:
            return f"balance[z={row // T + 1},t={row % T + 1}]"
        row -= n * T
        if row < n * T:
            return f"soc[z={row // T + 1},t={row % T + 1}]"
        row -= n * T
        n_sym = n * (n - 1)
        if row < n_sym * T:
            s, t = divmod(row, T)
            z, y = lay.ordered_internal()[s]
            return f"trade_sym[{z + 1}->{y + 1},t={t + 1}]"
        row -= n_sym * T
        if row < 2 * n * T:
            side = "buy" if row < n * T else "sell"
            r = row % (n * T)
            return f"grid_{side}_cap[z={r // T + 1},t={r % T + 1}]"
        row -= 2 * n * T
        if row < 4 * lay.nip * T:
            q, r = divmod(row, 4 * T)
            k, t = divmod(r, T)
            z, y = lay.internal_pairs()[q]
            name = ("buy_fwd", "sell_fwd", "buy_rev", "sell_rev")[k]
            return f"pair_{name}[{z + 1}-{y + 1},t={t + 1}]"
        row -= 4 * lay.nip * T
        kind = ("risk_cap", "risk_floor", "risk_ceiling")[row // n]
        return f"{kind}[z={row % n + 1}]"


def default_big_m(spec: SystemSpec, buy_price: np.ndarray, sell_bonus_price: np.ndarray) -> float:
    """Data-derived big-M: a 10x margin over max target plus max gross revenue."""
    total_cap = float(sum(spec.line_max[z][y]
                          for z in range(spec.n_smg) for y in range(spec.n_smg)))
    gross = float(np.sum(np.maximum(sell_bonus_price, buy_price)) * total_cap)
    return BIG_M_FACTOR * (max(spec.target) + max(gross, 1.0))


def build_horizon_instance(spec: SystemSpec, architecture: str, *, month: int,
                           load: np.ndarray, pv_max: np.ndarray, wt_max: np.ndarray,
                           buy_price: np.ndarray, sell_grid_price: np.ndarray,
                           sell_int_price: np.ndarray, cvd: float,
                           initial_soc: np.ndarray, include_risk: bool = True,
                           edr_mode: str = "hard", terminal_soc_rule: str = "free",
                           hour_offset: int = 0) -> MonthlyInstance:
    """Assemble the MIP over an arbitrary horizon (a month or a chunk of one)."""
    n = spec.n_smg
    load = np.atleast_2d(np.asarray(load, dtype=float))
    pv_max = np.atleast_2d(np.asarray(pv_max, dtype=float))
    wt_max = np.atleast_2d(np.asarray(wt_max, dtype=float))
    T = load.shape[1]
    for name, arr, shape in (("load", load, (n, T)), ("pv_max", pv_max, (n, T)),
                             ("wt_max", wt_max, (n, T))):
        if arr.shape != shape:
            raise BuildError(f"{name} must have shape {shape}, got {arr.shape}")
        if np.any(arr < 0):
            raise BuildError(f"{name} has negative entries")
    buy_price = np.asarray(buy_price, dtype=float)
    sell_grid_price = np.asarray(sell_grid_price, dtype=float)
    sell_int_price = np.asarray(sell_int_price, dtype=float)
    for name, arr in (("buy_price", buy_price), ("sell_grid_price", sell_grid_price),
                      ("sell_int_price", sell_int_price)):
        if arr.shape != (T,):
            raise BuildError(f"{name} must have shape ({T},), got {arr.shape}")
        if np.any(arr < 0):
            raise BuildError(f"{name} has negative entries")
    initial_soc = np.asarray(initial_soc, dtype=float)
    if initial_soc.shape != (n,):
        raise BuildError(f"initial_soc must have shape ({n},)")
    if np.any(initial_soc < spec.soc_min - 1e-12) or np.any(initial_soc > spec.soc_max + 1e-12):
        raise BuildError(f"initial_soc {initial_soc} outside "
                         f"[{spec.soc_min}, {spec.soc_max}]")
    if architecture not in ("mmg", "smg"):
        raise BuildError(f"unknown architecture {architecture!r}")
    if cvd <= 0:
        raise BuildError(f"cvd factor must be > 0, got {cvd}")

    lay = VarLayout(n=n, T=T, include_risk=include_risk)
    ncols = lay.ncols
    big_m = spec.big_m if spec.big_m is not None else default_big_m(
        spec, buy_price, sell_grid_price)

    # ----- objective: trade revenue minus purchase cost
    c = np.zeros(ncols)
    for z in range(n):
        for y in range(n):
            bcols = slice(lay.buy(z, y, 0), lay.buy(z, y, 0) + T)
            scols = slice(lay.sell(z, y, 0), lay.sell(z, y, 0) + T)
            c[bcols] = -buy_price
            c[scols] = sell_grid_price if y == z else sell_int_price

    # ----- bounds
    lb = np.zeros(ncols)
    ub = np.full(ncols, np.inf)
    nT = n * T
    ub[0:nT] = pv_max.reshape(-1)
    ub[nT:2 * nT] = wt_max.reshape(-1)
    for z in range(n):
        lb[lay.bat(z, 0):lay.bat(z, 0) + T] = spec.bat_min[z]
        ub[lay.bat(z, 0):lay.bat(z, 0) + T] = spec.bat_max[z]
        lb[lay.soc(z, 0):lay.soc(z, 0) + T] = spec.soc_min
        ub[lay.soc(z, 0):lay.soc(z, 0) + T] = spec.soc_max
        if terminal_soc_rule == "return_to_initial":
            lb[lay.soc(z, T - 1)] = initial_soc[z]
            ub[lay.soc(z, T - 1)] = initial_soc[z]
        for y in range(n):
            cap = spec.line_max[z][y]
            if architecture == "smg" and z != y:
                cap = 0.0
            ub[lay.buy(z, y, 0):lay.buy(z, y, 0) + T] = cap
            ub[lay.sell(z, y, 0):lay.sell(z, y, 0) + T] = cap
        ub[lay.x_grid(z, 0):lay.x_grid(z, 0) + T] = 1.0
    for q, (z, y) in enumerate(lay.internal_pairs()):
        x0 = lay.x_pair(q, 0)
        if architecture == "smg":
            lb[x0:x0 + T] = 1.0       # no internal trade: pin the shared binary
        ub[x0:x0 + T] = 1.0
    if include_risk:
        for z in range(n):
            ub[lay.risk(z)] = spec.edr_cap if edr_mode == "hard" else big_m
            ub[lay.w(z)] = 1.0

    # ----- constraint rows (COO triplets per block)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    t_idx = np.arange(T)

    def add(r, cc, v):
        rows.append(np.asarray(r, dtype=np.int64))
        cols.append(np.asarray(cc, dtype=np.int64))
        vals.append(np.asarray(v, dtype=float))

    # balance: pv + wt + bat + sum_y (buy - sell) = cvd * load
    for z in range(n):
        r = z * T + t_idx
        for base in (lay.pv(z, 0), lay.wt(z, 0), lay.bat(z, 0)):
            add(r, base + t_idx, np.ones(T))
        for y in range(n):
            add(r, lay.buy(z, y, 0) + t_idx, np.ones(T))
            add(r, lay.sell(z, y, 0) + t_idx, -np.ones(T))
    # soc recurrence: soc_t - soc_{t-1} + bat_t / S = 0, soc_0 pinned to initial
    soc0 = n * T
    for z in range(n):
        r = soc0 + z * T + t_idx
        add(r, lay.soc(z, 0) + t_idx, np.ones(T))
        add(r[1:], lay.soc(z, 0) + t_idx[:-1], -np.ones(T - 1))
        add(r, lay.bat(z, 0) + t_idx, np.full(T, 1.0 / spec.base_power[z]))
    # trade symmetry: sell_{zy} = buy_{yz}
    sym0 = 2 * n * T
    for s, (z, y) in enumerate(lay.ordered_internal()):
        r = sym0 + s * T + t_idx
        add(r, lay.sell(z, y, 0) + t_idx, np.ones(T))
        add(r, lay.buy(y, z, 0) + t_idx, -np.ones(T))
    # grid line complementarity
    cg0 = sym0 + n * (n - 1) * T
    for z in range(n):
        cap = spec.line_max[z][z]
        r = cg0 + z * T + t_idx
        add(r, lay.buy(z, z, 0) + t_idx, np.ones(T))
        add(r, lay.x_grid(z, 0) + t_idx, np.full(T, -cap))
        r = cg0 + nT + z * T + t_idx
        add(r, lay.sell(z, z, 0) + t_idx, np.ones(T))
        add(r, lay.x_grid(z, 0) + t_idx, np.full(T, cap))
    # internal line complementarity (shared binary per unordered pair)
    ci0 = cg0 + 2 * nT
    for q, (z, y) in enumerate(lay.internal_pairs()):
        cap = spec.line_max[z][y]
        base = ci0 + q * 4 * T
        add(base + t_idx, lay.buy(z, y, 0) + t_idx, np.ones(T))
        add(base + t_idx, lay.x_pair(q, 0) + t_idx, np.full(T, -cap))
        add(base + T + t_idx, lay.sell(z, y, 0) + t_idx, np.ones(T))
        add(base + T + t_idx, lay.x_pair(q, 0) + t_idx, np.full(T, cap))
        add(base + 2 * T + t_idx, lay.buy(y, z, 0) + t_idx, np.ones(T))
        add(base + 2 * T + t_idx, lay.x_pair(q, 0) + t_idx, np.full(T, cap))
        add(base + 3 * T + t_idx, lay.sell(y, z, 0) + t_idx, np.ones(T))
        add(base + 3 * T + t_idx, lay.x_pair(q, 0) + t_idx, np.full(T, -cap))
    rr0 = ci0 + 4 * lay.nip * T
    nrows = rr0 + (3 * n if include_risk else 0)

    if include_risk:
        # downside risk linearization around each SMG's profit expression
        for z in range(n):
            of_cols: list[int] = []
            of_vals: list[float] = []
            for y in range(n):
                of_cols.extend(lay.buy(z, y, 0) + t_idx)
                of_vals.extend(-buy_price)
                of_cols.extend(lay.sell(z, y, 0) + t_idx)
                of_vals.extend(sell_grid_price if y == z else sell_int_price)
            add([rr0 + z, rr0 + z], [lay.risk(z), lay.w(z)], [1.0, -big_m])
            r2 = rr0 + n + z
            add(np.full(len(of_cols) + 1, r2),
                [lay.risk(z)] + of_cols, [1.0] + of_vals)
            r3 = rr0 + 2 * n + z
            add(np.full(len(of_cols) + 2, r3),
                [lay.risk(z), lay.w(z)] + of_cols, [1.0, big_m] + of_vals)

    senses = np.empty(nrows, dtype="U1")
    rhs = np.zeros(nrows)
    senses[:sym0 + n * (n - 1) * T] = "="
    rhs[0:n * T] = (cvd * load).reshape(-1)
    for z in range(n):
        rhs[soc0 + z * T] = initial_soc[z]
    senses[cg0:rr0] = "<"
    for z in range(n):
        rhs[cg0 + nT + z * T: cg0 + nT + (z + 1) * T] = spec.line_max[z][z]
    for q, (z, y) in enumerate(lay.internal_pairs()):
        base = ci0 + q * 4 * T
        rhs[base + T: base + 3 * T] = spec.line_max[z][y]
    if include_risk:
        senses[rr0:rr0 + n] = "<"
        senses[rr0 + n: rr0 + 2 * n] = ">"
        senses[rr0 + 2 * n: rr0 + 3 * n] = "<"
        rhs[rr0 + n: rr0 + 2 * n] = spec.target[:n]
        rhs[rr0 + 2 * n: rr0 + 3 * n] = np.asarray(spec.target[:n]) + big_m

    a_matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nrows, ncols))

    # ----- binary groups for the solver
    groups: list[BinaryGroup] = []
    for z in range(n):
        for t in range(T):
            groups.append(BinaryGroup(
                kind="grid", x_col=lay.x_grid(z, t),
                label=f"grid[z={z + 1},t={t + 1}]", cap=spec.line_max[z][z],
                blocked_at_one=(lay.sell(z, z, t),),
                blocked_at_zero=(lay.buy(z, z, t),),
                measure_cols=(lay.buy(z, z, t), lay.sell(z, z, t))))
    for q, (z, y) in enumerate(lay.internal_pairs()):
        for t in range(T):
            groups.append(BinaryGroup(
                kind="pair", x_col=lay.x_pair(q, t),
                label=f"pair[{z + 1}-{y + 1},t={t + 1}]", cap=spec.line_max[z][y],
                blocked_at_one=(lay.sell(z, y, t), lay.buy(y, z, t)),
                blocked_at_zero=(lay.buy(z, y, t), lay.sell(y, z, t)),
                measure_cols=(lay.sell(y, z, t), lay.sell(z, y, t))))
    if include_risk:
        for z in range(n):
            groups.append(BinaryGroup(kind="flag", x_col=lay.w(z),
                                      label=f"risk_flag[z={z + 1}]"))

    return MonthlyInstance(
        spec=spec, architecture=architecture, month=month, hours=T,
        hour_offset=hour_offset, cvd=cvd, include_risk=include_risk,
        edr_mode=edr_mode, terminal_soc_rule=terminal_soc_rule,
        initial_soc=initial_soc, load=load, pv_max=pv_max, wt_max=wt_max,
        buy_price=buy_price, sell_grid_price=sell_grid_price,
        sell_int_price=sell_int_price, big_m=big_m, layout=lay, c=c, lb=lb,
        ub=ub, a_matrix=a_matrix, senses=senses, rhs=rhs, binaries=groups)


def _month_values(profile: HourlyProfile, month: int, hours: int) -> np.ndarray:
    vals = profile.values
    if len(vals) == hours:
        return vals
    if len(vals) == sum(MONTH_HOURS):
        return vals[month_slice(month)]
    raise BuildError(f"profile {profile.kind}/{profile.smg_id} has {len(vals)} "
                     f"hours; expected {hours} or a full year")


def build_month_instance(spec: SystemSpec, scenario: ScenarioConfig,
                         calendar: MonthCalendar,
                         profiles: dict[tuple[str, int], HourlyProfile],
                         tariff: TariffSchedule, cvd_table: CovidFactorTable,
                         initial_soc: np.ndarray) -> MonthlyInstance:
    """Assemble one calendar month for a scenario, with COVID scaling applied."""
    m, T, n = calendar.month_index, calendar.hours, spec.n_smg
    load = np.stack([_month_values(profiles[("load", z + 1)], m, T) for z in range(n)])
    pv = np.stack([_month_values(profiles[("pv_max", z + 1)], m, T) for z in range(n)])
    wt = np.stack([_month_values(profiles[("wt_max", z + 1)], m, T) for z in range(n)])
    cvd = covid_factor(cvd_table, m, enabled=scenario.covid)
    return build_horizon_instance(
        spec, scenario.architecture, month=m, load=load, pv_max=pv, wt_max=wt,
        buy_price=tariff.buy_price(m), sell_grid_price=tariff.sell_grid_price(m),
        sell_int_price=tariff.sell_internal_price(m), cvd=cvd,
        initial_soc=initial_soc, include_risk=True, edr_mode=scenario.edr_mode,
        terminal_soc_rule=scenario.terminal_soc_rule)


# ---------------------------------------------------------------------------
# solutions


@dataclass
class ScheduleSolution:
    """Dispatch, trades, SOC, binaries and per-SMG profit/risk of one horizon."""

    month: int
    hours: int
    hour_offset: int
    pv: np.ndarray        # (n, T)
    wt: np.ndarray
    bat: np.ndarray
    soc: np.ndarray
    buy: np.ndarray       # (n, n, T), [z][y] = power bought by z from y (y==z: grid)
    sell: np.ndarray      # (n, n, T)
    x: np.ndarray         # (n, n, T) direction binaries; x[y][z] = 1 - x[z][y] internally
    of: np.ndarray        # (n,) profit per SMG [$]
    risk: np.ndarray      # (n,)
    w: np.ndarray         # (n,)
    objective: float
    heuristic: bool = False

    @property
    def n_smg(self) -> int:
        return len(self.of)

    @property
    def final_soc(self) -> np.ndarray:
        return self.soc[:, -1].copy()


def recompute_profits(instance: MonthlyInstance, buy: np.ndarray,
                      sell: np.ndarray) -> np.ndarray:
    """Per-SMG profit from flows and prices, independent of the objective vector."""
    n = instance.n_smg
    of = np.zeros(n)
    for z in range(n):
        rev = sell[z, z] @ instance.sell_grid_price
        for y in range(n):
            if y != z:
                rev += sell[z, y] @ instance.sell_int_price
            of[z] -= buy[z, y] @ instance.buy_price
        of[z] += rev
    return of


def extract_solution(instance: MonthlyInstance, xvec: np.ndarray,
                     heuristic: bool = False) -> ScheduleSolution:
    """Shape a raw solver vector into a named schedule, recomputing profits."""
    lay = instance.layout
    n, T = lay.n, lay.T
    nT = n * T

    def zt_block(base: int) -> np.ndarray:
        return xvec[base:base + nT].reshape(n, T).copy()

    pv = zt_block(0)
    wt = zt_block(nT)
    bat = zt_block(2 * nT)
    soc = zt_block(3 * nT)
    buy = np.zeros((n, n, T))
    sell = np.zeros((n, n, T))
    x = np.zeros((n, n, T))
    for z in range(n):
        for y in range(n):
            buy[z, y] = xvec[lay.buy(z, y, 0): lay.buy(z, y, 0) + T]
            sell[z, y] = xvec[lay.sell(z, y, 0): lay.sell(z, y, 0) + T]
        x[z, z] = xvec[lay.x_grid(z, 0): lay.x_grid(z, 0) + T]
    for q, (z, y) in enumerate(lay.internal_pairs()):
        xp = xvec[lay.x_pair(q, 0): lay.x_pair(q, 0) + T]
        x[z, y] = xp
        x[y, z] = 1.0 - xp
    of = recompute_profits(instance, buy, sell)
    if instance.include_risk:
        risk = np.array([xvec[lay.risk(z)] for z in range(n)])
        w = np.array([xvec[lay.w(z)] for z in range(n)])
    else:
        risk = np.maximum(0.0, np.asarray(instance.spec.target[:n]) - of)
        w = (of < np.asarray(instance.spec.target[:n])).astype(float)
    return ScheduleSolution(month=instance.month, hours=T,
                            hour_offset=instance.hour_offset, pv=pv, wt=wt,
                            bat=bat, soc=soc, buy=buy, sell=sell, x=x, of=of,
                            risk=risk, w=w, objective=float(of.sum()),
                            heuristic=heuristic)


def profit_accounting(sol: ScheduleSolution, tariff: TariffSchedule,
                      sell_int_equals_buy: bool = True) -> tuple[np.ndarray, float]:
    """Recompute (OF_z, OF_month) from a solution and the tariff.

    Internal payments cancel in the aggregate, so OF_month equals grid sales
    revenue minus grid purchase cost alone.
    """
    t0, T = sol.hour_offset, sol.hours
    buy_p = tariff.buy_price(sol.month)[t0:t0 + T]
    sell_g = tariff.sell_grid_price(sol.month)[t0:t0 + T]
    sell_i = tariff.sell_internal_price(sol.month)[t0:t0 + T] if sell_int_equals_buy else buy_p
    n = sol.n_smg
    of = np.zeros(n)
    for z in range(n):
        of[z] = sol.sell[z, z] @ sell_g
        for y in range(n):
            if y != z:
                of[z] += sol.sell[z, y] @ sell_i
            of[z] -= sol.buy[z, y] @ buy_p
    return of, float(of.sum())


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    constraint: str
    where: str
    amount: float

    def __str__(self):
        return f"{self.constraint} at {self.where}: violated by {self.amount:.3e}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, constraint: str, where: str, amount: float):
        self.violations.append(Violation(constraint, where, float(amount)))

    def summary(self) -> str:
        if self.ok:
            return "clean: all constraints satisfied"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  {v}" for v in self.violations[:50]]
        if len(self.violations) > 50:
            lines.append(f"  ... and {len(self.violations) - 50} more")
        return "\n".join(lines)


def _check_bounds(report: ValidationReport, name: str, arr: np.ndarray,
                  lo, hi, tol: float, axes: str = "zt"):
    low = np.asarray(lo) - tol
    high = np.asarray(hi) + tol
    bad = (arr < low) | (arr > high)
    for idx in np.argwhere(bad):
        where = ",".join(f"{a}={i + 1}" for a, i in zip(axes, idx))
        over = max(float((low - arr)[tuple(idx)]), float((arr - high)[tuple(idx)]))
        report.add(f"{name}_bounds", where, over + tol)


def validate_solution(instance: MonthlyInstance, sol: ScheduleSolution,
                      tol: float = 1e-6) -> ValidationReport:
    """Numerically recheck every model constraint against a candidate solution.

    Works from the instance's named data (loads, prices, capacities), not from
    its assembled coefficient matrix, so builder and validator stay independent.
    Returns a structured violation list; never silently passes.
    """
    spec = instance.spec
    n, T = instance.n_smg, instance.hours
    rep = ValidationReport()
    if sol.pv.shape != (n, T) or sol.buy.shape != (n, n, T):
        rep.add("dimensions", "solution", 1.0)
        return rep

    # binaries first: integrality, then round for the gating checks
    x = sol.x
    w = sol.w
    if np.any(np.abs(x - np.round(x)) > tol):
        for idx in np.argwhere(np.abs(x - np.round(x)) > tol):
            rep.add("binary_integrality", f"x[z={idx[0] + 1},y={idx[1] + 1},t={idx[2] + 1}]",
                    float(np.abs(x - np.round(x))[tuple(idx)]))
    if np.any(np.abs(w - np.round(w)) > tol):
        for z in np.nonzero(np.abs(w - np.round(w)) > tol)[0]:
            rep.add("binary_integrality", f"w[z={z + 1}]", float(abs(w[z] - round(w[z]))))
    xr = np.round(x)
    wr = np.round(w)
    for z in range(n):
        for y in range(n):
            if y != z:
                off = np.abs(xr[z, y] + xr[y, z] - 1.0)
                for t in np.nonzero(off > tol)[0]:
                    rep.add("shared_binary", f"x[{z + 1},{y + 1},t={t + 1}]", float(off[t]))

    # (11)-(13) power balance with the demand-change factor
    net = sol.buy.sum(axis=1) - sol.sell.sum(axis=1)
    residual = sol.pv + sol.wt + sol.bat + net - instance.cvd * instance.load
    for idx in np.argwhere(np.abs(residual) > tol):
        rep.add("balance", f"z={idx[0] + 1},t={idx[1] + 1}", float(abs(residual[tuple(idx)])))

    # (14)-(15) line limits gated by the direction binary
    caps = np.array([[spec.line_max[z][y] for y in range(n)] for z in range(n)])
    if instance.architecture == "smg":
        caps = np.diag(np.diag(caps))
    buy_cap = caps[:, :, None] * xr
    sell_cap = caps[:, :, None] * (1.0 - xr)
    for name, arr, cap in (("line_buy", sol.buy, buy_cap), ("line_sell", sol.sell, sell_cap)):
        bad = (arr < -tol) | (arr > cap + tol)
        for idx in np.argwhere(bad):
            amt = max(float(-arr[tuple(idx)]), float((arr - cap)[tuple(idx)]))
            rep.add(name, f"z={idx[0] + 1},y={idx[1] + 1},t={idx[2] + 1}", amt)
    over = np.minimum(sol.buy, sol.sell)
    for idx in np.argwhere(over > tol):
        rep.add("complementarity", f"z={idx[0] + 1},y={idx[1] + 1},t={idx[2] + 1}",
                float(over[tuple(idx)]))

    # (16) trade symmetry
    for z in range(n):
        for y in range(n):
            if z == y:
                continue
            diff = np.abs(sol.sell[z, y] - sol.buy[y, z])
            for t in np.nonzero(diff > tol)[0]:
                rep.add("trade_symmetry", f"{z + 1}->{y + 1},t={t + 1}", float(diff[t]))

    # (17)-(18) generation limits
    _check_bounds(rep, "pv", sol.pv, 0.0, instance.pv_max, tol)
    _check_bounds(rep, "wt", sol.wt, 0.0, instance.wt_max, tol)

    # (19)-(21) battery power, SOC box and recurrence
    _check_bounds(rep, "bat", sol.bat,
                  np.asarray(spec.bat_min[:n])[:, None] * np.ones(T),
                  np.asarray(spec.bat_max[:n])[:, None] * np.ones(T), tol)
    _check_bounds(rep, "soc", sol.soc, spec.soc_min, spec.soc_max, tol)
    s_base = np.asarray(spec.base_power[:n])[:, None]
    prev = np.concatenate([instance.initial_soc[:, None], sol.soc[:, :-1]], axis=1)
    rec = sol.soc - prev + sol.bat / s_base
    for idx in np.argwhere(np.abs(rec) > tol):
        rep.add("soc_recurrence", f"z={idx[0] + 1},t={idx[1] + 1}", float(abs(rec[tuple(idx)])))
    if instance.terminal_soc_rule == "return_to_initial":
        diff = np.abs(sol.soc[:, -1] - instance.initial_soc)
        for z in np.nonzero(diff > tol)[0]:
            rep.add("terminal_soc", f"z={z + 1}", float(diff[z]))

    # architecture restriction (10)
    if instance.architecture == "smg":
        for z in range(n):
            for y in range(n):
                if z == y:
                    continue
                amt = float(sol.buy[z, y].max(initial=0.0) + sol.sell[z, y].max(initial=0.0))
                if amt > tol:
                    rep.add("internal_trade_forbidden", f"z={z + 1},y={y + 1}", amt)

    # profit bookkeeping: flows -> OF must reproduce the stored values
    of = recompute_profits(instance, sol.buy, sol.sell)
    for z in range(n):
        if abs(of[z] - sol.of[z]) > tol * max(1.0, abs(of[z])):
            rep.add("profit_accounting", f"z={z + 1}", float(abs(of[z] - sol.of[z])))
    if abs(sol.objective - of.sum()) > tol * max(1.0, abs(of.sum())):
        rep.add("objective_agreement", "total", float(abs(sol.objective - of.sum())))

    # (22)-(25) downside risk linearization and identity
    m_big = instance.big_m
    target = np.asarray(spec.target[:n])
    for z in range(n):
        rz, wz = sol.risk[z], wr[z]
        if rz < -tol or rz > m_big * wz + tol:
            rep.add("risk_cap", f"z={z + 1}", float(max(-rz, rz - m_big * wz)))
        gap = rz - (target[z] - of[z])
        if gap < -tol or gap > m_big * (1.0 - wz) + tol:
            rep.add("risk_linearization", f"z={z + 1}",
                    float(max(-gap, gap - m_big * (1.0 - wz))))
        if instance.edr_mode == "hard" and rz > spec.edr_cap + tol:
            rep.add("risk_edr", f"z={z + 1}", float(rz - spec.edr_cap))
        ident = abs(rz - max(0.0, target[z] - of[z]))
        if ident > tol:
            rep.add("risk_identity", f"z={z + 1}", float(ident))
    return rep
