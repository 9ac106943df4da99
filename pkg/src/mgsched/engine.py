"""Scenario runs across the year, comparison tables and report emission."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .demand import DemandConfig, TariffSchedule, build_month_suites, build_tariff
from .errors import DomainError, SchemaError
from .model import ScheduleSolution
from .profiles import (CovidFactorTable, HOURS_PER_YEAR, HourlyProfile,
                       MonthCalendar, build_year_calendar, synthesize_year,
                       SynthesisSpec)
from .solver import MonthSolveResult, SolveContext, SolverOptions, solve_month
from .system import ScenarioConfig, SystemSpec, scenario_from_id

SCENARIO_NAMES = {1: "MMG with pandemic demand effect",
                  2: "MMG without pandemic demand effect",
                  3: "SMG with pandemic demand effect",
                  4: "SMG without pandemic demand effect"}


@dataclass
class YearData:
    """Everything a scenario run consumes: calendar, profiles, prices, factors."""

    calendar: tuple[MonthCalendar, ...]
    profiles: dict[tuple[str, int], HourlyProfile]
    tariff: TariffSchedule
    cvd_table: CovidFactorTable

    @property
    def n_smg(self) -> int:
        return max(z for _, z in self.profiles)

    def system_load(self) -> np.ndarray:
        return sum(p.values for (kind, _), p in self.profiles.items()
                   if kind == "load")


def build_year_data(profiles: dict[tuple[str, int], HourlyProfile],
                    demand_config: DemandConfig | None = None,
                    cvd_table: CovidFactorTable | None = None,
                    sell_bonus: float = 1.1,
                    start_weekday: int = 0) -> YearData:
    """Fit the demand suites and tariff on top of a set of year profiles."""
    demand_config = demand_config or DemandConfig()
    calendar = build_year_calendar(start_weekday)
    n = max(z for _, z in profiles)
    for z in range(1, n + 1):
        for kind in ("load", "pv_max", "wt_max"):
            if (kind, z) not in profiles:
                raise DomainError(f"missing profile {kind} for SMG {z}")
            if len(profiles[(kind, z)].values) != HOURS_PER_YEAR:
                raise DomainError(f"profile {kind}/{z} must cover the full year")
    system_load = sum(profiles[("load", z)].values for z in range(1, n + 1))
    suites = build_month_suites(calendar, system_load, demand_config)
    tariff = build_tariff(calendar, system_load, suites, demand_config,
                          sell_bonus=sell_bonus)
    return YearData(calendar=calendar, profiles=profiles, tariff=tariff,
                    cvd_table=cvd_table or CovidFactorTable.pandemic_2020())


def synthesize_year_data(spec: SynthesisSpec | None = None,
                         demand_config: DemandConfig | None = None,
                         cvd_table: CovidFactorTable | None = None,
                         sell_bonus: float = 1.1) -> YearData:
    spec = spec or SynthesisSpec()
    return build_year_data(synthesize_year(spec), demand_config, cvd_table,
                           sell_bonus, start_weekday=spec.start_weekday)


@dataclass
class ScenarioResult:
    """Profit/risk panel of one scenario across the year.

    Monthly matrices are indexed [month-1][smg-1]; infeasible months carry
    NaN and are excluded from annual totals (their status says why).
    """

    scenario_id: int
    architecture: str
    covid: bool
    monthly_profit: list[list[float]]
    monthly_risk: list[list[float]]
    monthly_total: list[float]
    annual_profit: float
    annual_risk: float
    statuses: list[str]
    details: list[str | None]
    solutions: list[ScheduleSolution | None] = field(default=None, compare=False,
                                                     repr=False)

    @property
    def name(self) -> str:
        return SCENARIO_NAMES[self.scenario_id]

    @property
    def all_feasible(self) -> bool:
        return all(s != "infeasible" for s in self.statuses)

    def to_dict(self) -> dict:
        return {"schema_version": 1,
                "scenario_id": self.scenario_id,
                "architecture": self.architecture,
                "covid": self.covid,
                "monthly_profit": self.monthly_profit,
                "monthly_risk": self.monthly_risk,
                "monthly_total": self.monthly_total,
                "annual_profit": self.annual_profit,
                "annual_risk": self.annual_risk,
                "statuses": self.statuses,
                "details": self.details}

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioResult":
        if data.get("schema_version") != 1:
            raise SchemaError(f"unsupported result schema {data.get('schema_version')}")
        return cls(scenario_id=data["scenario_id"],
                   architecture=data["architecture"], covid=data["covid"],
                   monthly_profit=[list(map(float, r)) for r in data["monthly_profit"]],
                   monthly_risk=[list(map(float, r)) for r in data["monthly_risk"]],
                   monthly_total=list(map(float, data["monthly_total"])),
                   annual_profit=float(data["annual_profit"]),
                   annual_risk=float(data["annual_risk"]),
                   statuses=list(data["statuses"]),
                   details=list(data["details"]))


def run_scenario(spec: SystemSpec, scenario: ScenarioConfig, data: YearData,
                 opts: SolverOptions | None = None,
                 keep_solutions: bool = True) -> ScenarioResult:
    """Solve the 12 months in order with SOC carried between months.

    An infeasible month (hard EDR mode) is recorded and the remaining months
    are still attempted, carrying the SOC of the last feasible month.
    """
    opts = opts or SolverOptions(mode="chunked", node_limit=1)
    n = spec.n_smg
    ctx = SolveContext()
    soc = np.full(n, spec.soc_max)
    monthly_profit: list[list[float]] = []
    monthly_risk: list[list[float]] = []
    statuses: list[str] = []
    details: list[str | None] = []
    solutions: list[ScheduleSolution | None] = []
    carried_note = None
    for cal in data.calendar:
        res: MonthSolveResult = solve_month(spec, scenario, cal, data.profiles,
                                            data.tariff, data.cvd_table, soc,
                                            opts, ctx)
        statuses.append(res.status)
        if res.status == "infeasible":
            detail = res.detail or f"month {cal.month_index} infeasible"
            carried_note = f"SOC carried from month {cal.month_index - 1}" \
                if cal.month_index > 1 else "SOC kept at year-start value"
            details.append(f"{detail} ({carried_note})")
            monthly_profit.append([math.nan] * n)
            monthly_risk.append([math.nan] * n)
            solutions.append(None)
            continue
        details.append(res.detail)
        sol = res.solution
        monthly_profit.append([float(v) for v in sol.of])
        monthly_risk.append([float(v) for v in sol.risk])
        solutions.append(sol if keep_solutions else None)
        soc = sol.final_soc

    monthly_total = [float(np.nansum(row)) if not all(math.isnan(v) for v in row)
                     else math.nan for row in monthly_profit]
    annual_profit = float(np.nansum([v for row in monthly_profit for v in row]))
    annual_risk = float(np.nansum([v for row in monthly_risk for v in row]))
    return ScenarioResult(
        scenario_id=scenario.scenario_id, architecture=scenario.architecture,
        covid=scenario.covid, monthly_profit=monthly_profit,
        monthly_risk=monthly_risk, monthly_total=monthly_total,
        annual_profit=annual_profit, annual_risk=annual_risk,
        statuses=statuses, details=details, solutions=solutions)


def run_scenarios(spec: SystemSpec, scenario_ids: list[int], data: YearData,
                  opts: SolverOptions | None = None, edr_mode: str = "hard",
                  terminal_soc_rule: str = "free",
                  keep_solutions: bool = True) -> dict[int, ScenarioResult]:
    out: dict[int, ScenarioResult] = {}
    for sid in scenario_ids:
        cfg = scenario_from_id(sid, terminal_soc_rule=terminal_soc_rule,
                               edr_mode=edr_mode)
        out[sid] = run_scenario(spec, cfg, data, opts, keep_solutions)
    return out


# ---------------------------------------------------------------------------
# comparisons

MONTH_NAMES = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


@dataclass
class ComparisonTable:
    """Percent change of a metric between two scenarios, month by month.

    Percent change is 100*(a-b)/|b|. Months whose baseline is zero are
    flagged instead of divided; months with a negative baseline are flagged
    because the naive percentage misleads there (the absolute change column
    is authoritative for them). Two year aggregates are reported because the
    aggregation convention is ambiguous: the change of annual totals and the
    mean of the defined monthly percents.
    """

    metric: str
    scenario_a: int
    scenario_b: int
    monthly_pct: list[float | None]
    monthly_abs: list[float]
    flags: list[str]
    annual_total_pct: float | None
    mean_monthly_pct: float | None

    def to_dict(self) -> dict:
        return {"schema_version": 1, "metric": self.metric,
                "scenario_a": self.scenario_a, "scenario_b": self.scenario_b,
                "monthly_pct": self.monthly_pct, "monthly_abs": self.monthly_abs,
                "flags": self.flags, "annual_total_pct": self.annual_total_pct,
                "mean_monthly_pct": self.mean_monthly_pct}


def compare(a: ScenarioResult, b: ScenarioResult, metric: str = "profit") -> ComparisonTable:
    """Tabulate the month-by-month change of profit or risk between two runs."""
    if metric not in ("profit", "risk"):
        raise DomainError(f"metric must be 'profit' or 'risk', got {metric!r}")
    if metric == "profit":
        series_a = [float(np.nansum(r)) for r in a.monthly_profit]
        series_b = [float(np.nansum(r)) for r in b.monthly_profit]
        tot_a, tot_b = a.annual_profit, b.annual_profit
    else:
        series_a = [float(np.nansum(r)) for r in a.monthly_risk]
        series_b = [float(np.nansum(r)) for r in b.monthly_risk]
        tot_a, tot_b = a.annual_risk, b.annual_risk
    pct: list[float | None] = []
    absd: list[float] = []
    flags: list[str] = []
    for va, vb in zip(series_a, series_b):
        absd.append(va - vb)
        if math.isnan(va) or math.isnan(vb):
            pct.append(None)
            flags.append("infeasible_month")
        elif vb == 0.0:
            pct.append(None)
            flags.append("zero_baseline")
        else:
            pct.append(100.0 * (va - vb) / abs(vb))
            flags.append("negative_baseline" if vb < 0 else "")
    defined = [p for p in pct if p is not None]
    return ComparisonTable(
        metric=metric, scenario_a=a.scenario_id, scenario_b=b.scenario_id,
        monthly_pct=pct, monthly_abs=absd, flags=flags,
        annual_total_pct=(100.0 * (tot_a - tot_b) / abs(tot_b)) if tot_b else None,
        mean_monthly_pct=(sum(defined) / len(defined)) if defined else None)


# ---------------------------------------------------------------------------
# reports


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _json_dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def emit_report(results: list[ScenarioResult], fmt: str, out_dir: str | Path,
                tariff: TariffSchedule | None = None) -> list[Path]:
    """Write per-month tables, annual summary and plot-ready hourly series.

    fmt selects the serialization of the tabular reports ('csv' or 'json');
    the hourly dispatch series and prices are always CSV (they are bulky,
    plot-ready data). Output is byte-identical for identical inputs.
    """
    if fmt not in ("csv", "json"):
        raise DomainError(f"format must be 'csv' or 'json', got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for res in sorted(results, key=lambda r: r.scenario_id):
        stem = f"scenario_{res.scenario_id}"
        if fmt == "csv":
            path = out / f"{stem}_monthly.csv"
            rows = []
            n = len(res.monthly_profit[0]) if res.monthly_profit else 0
            for m in range(len(res.monthly_profit)):
                for z in range(n):
                    rows.append([m + 1, MONTH_NAMES[m], z + 1,
                                 res.monthly_profit[m][z], res.monthly_risk[m][z],
                                 res.statuses[m]])
            _write_csv(path, ["month", "month_name", "smg", "profit", "risk", "status"],
                       rows)
        else:
            path = out / f"{stem}.json"
            _json_dump(path, res.to_dict())
        written.append(path)

        hourly = out / f"{stem}_hourly.csv"
        rows = []
        if res.solutions:
            for m, sol in enumerate(res.solutions, start=1):
                if sol is None:
                    continue
                n = sol.n_smg
                for z in range(n):
                    grid_buy = sol.buy[z, z]
                    grid_sell = sol.sell[z, z]
                    int_buy = sol.buy[z].sum(axis=0) - grid_buy
                    int_sell = sol.sell[z].sum(axis=0) - grid_sell
                    for t in range(sol.hours):
                        rows.append([m, t + 1, z + 1,
                                     float(sol.pv[z, t]), float(sol.wt[z, t]),
                                     float(sol.bat[z, t]), float(sol.soc[z, t]),
                                     float(grid_buy[t]), float(grid_sell[t]),
                                     float(int_buy[t]), float(int_sell[t])])
        _write_csv(hourly, ["month", "hour", "smg", "pv", "wt", "bat", "soc",
                            "grid_buy", "grid_sell", "internal_buy", "internal_sell"],
                   rows)
        written.append(hourly)

    summary = {"schema_version": 1,
               "scenarios": [{"id": r.scenario_id, "name": r.name,
                              "architecture": r.architecture, "covid": r.covid,
                              "annual_profit": r.annual_profit,
                              "annual_risk": r.annual_risk,
                              "all_feasible": r.all_feasible,
                              "statuses": r.statuses}
                             for r in sorted(results, key=lambda r: r.scenario_id)]}
    if fmt == "json":
        spath = out / "summary.json"
        _json_dump(spath, summary)
    else:
        spath = out / "summary.csv"
        _write_csv(spath, ["scenario", "architecture", "covid", "annual_profit",
                           "annual_risk", "all_feasible"],
                   [[s["id"], s["architecture"], s["covid"], s["annual_profit"],
                     s["annual_risk"], s["all_feasible"]]
                    for s in summary["scenarios"]])
    written.append(spath)

    if tariff is not None:
        ppath = out / "prices.csv"
        rows = []
        for m in range(1, 13):
            buy = tariff.buy_price(m)
            sell = tariff.sell_grid_price(m)
            for t in range(len(buy)):
                rows.append([m, t + 1, float(buy[t]), float(sell[t])])
        _write_csv(ppath, ["month", "hour", "buy_price", "grid_sell_price"], rows)
        written.append(ppath)
    return written


def emit_comparison(table: ComparisonTable, fmt: str, path: str | Path) -> Path:
    path = Path(path)
    if fmt == "json":
        _json_dump(path, table.to_dict())
    else:
        rows = []
        for m in range(len(table.monthly_pct)):
            rows.append([MONTH_NAMES[m], table.monthly_pct[m],
                         table.monthly_abs[m], table.flags[m]])
        rows.append(["YearAverage(annual totals)", table.annual_total_pct, "", ""])
        rows.append(["YearAverage(mean monthly)", table.mean_monthly_pct, "", ""])
        _write_csv(path, ["month", "pct_change", "abs_change", "flag"], rows)
    return path


def load_result_json(path: str | Path) -> ScenarioResult:
    return ScenarioResult.from_dict(json.loads(Path(path).read_text()))
