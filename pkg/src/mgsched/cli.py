"""Command-line interface: synth, run and validate subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXAMPLE_CONFIG, RunConfig, load_run_config
from .demand import write_tariff_csv
from .engine import (ScenarioResult,YearData, build_year_data, compare,
                     emit_comparison, emit_report, run_scenario,
                     synthesize_year_data)
from .errors import MgschedError
from .lpformat import read_solution_values, write_solution_csv
from .model import build_month_instance, extract_solution, validate_solution
from .profiles import load_profile_csv, synthesize_year, write_profile_csv
from .solver import SolveContext, solve_month
from .system import scenario_from_id

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 3


def _year_data(cfg: RunConfig) -> YearData:
    if cfg.profile_paths is not None:
        profiles = {(kind, z): load_profile_csv(path, kind, z)
                    for (kind, z), path in cfg.profile_paths.items()}
        return build_year_data(profiles, cfg.demand, cfg.cvd_table(),
                               cfg.sell_bonus, cfg.synthesis.start_weekday)
    return synthesize_year_data(cfg.synthesis, cfg.demand, cfg.cvd_table(),
                                cfg.sell_bonus)


def cmd_synth(args) -> int:
    cfg = load_run_config(args.config, seed=args.seed, out_dir=args.out)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    profiles = synthesize_year(cfg.synthesis)
    name_map = {"load": "load", "pv_max": "pv", "wt_max": "wt"}
    for (kind, z), prof in sorted(profiles.items()):
        write_profile_csv(out / f"{name_map[kind]}_smg{z}.csv", prof)
    data = build_year_data(profiles, cfg.demand, cfg.cvd_table(),
                           cfg.sell_bonus, cfg.synthesis.start_weekday)
    write_tariff_csv(out / "tariff.csv", data.tariff)
    print(f"wrote 9 profile CSVs and tariff.csv to {out} "
          f"(seed {cfg.synthesis.seed})")
    return EXIT_OK


def _print_totals(results: dict[int, ScenarioResult]) -> None:
    print(f"{'scenario':<44} {'annual profit $':>16} {'annual risk $':>14}  status")
    for sid in sorted(results):
        r = results[sid]
        status = "ok" if r.all_feasible else "INFEASIBLE MONTHS"
        print(f"{sid}: {r.name:<41} {r.annual_profit:>16.2f} "
              f"{r.annual_risk:>14.2f}  {status}")


def cmd_run(args) -> int:
    cfg = load_run_config(args.config, seed=args.seed, scenarios=args.scenarios,
                          architecture=args.architecture, covid=args.covid,
                          edr_mode=args.edr_mode, solver_mode=args.solver_mode,
                          chunk_hours=args.chunk_hours, node_limit=args.node_limit,
                          out_dir=args.out)
    data = _year_data(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: dict[int, ScenarioResult] = {}
    for sid in cfg.scenarios:
        scenario = scenario_from_id(sid, terminal_soc_rule=cfg.terminal_soc_rule,
                                    edr_mode=cfg.edr_mode)
        results[sid] = run_scenario(cfg.system, scenario, data, cfg.solver)

    formats = ("csv", "json") if cfg.report_format == "both" else (cfg.report_format,)
    for fmt in formats:
        emit_report(list(results.values()), fmt, out, tariff=data.tariff)
    _emit_comparisons(results, formats, out)
    if cfg.dump_solutions or args.dump_solutions:
        _dump_solutions(cfg, data, results, out)
    _print_totals(results)

    infeasible = [(sid, m + 1) for sid, r in results.items()
                  for m, s in enumerate(r.statuses) if s == "infeasible"]
    if infeasible:
        for sid, month in infeasible:
            r = results[sid]
            print(f"scenario {sid} month {month} infeasible: "
                  f"{r.details[month - 1]}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _emit_comparisons(results: dict[int, ScenarioResult], formats, out: Path) -> None:
    pairs = [("covid_effect_mmg", 1, 2), ("covid_effect_smg", 3, 4),
             ("clustering_effect", 1, 3), ("clustering_effect_nocovid", 2, 4)]
    for name, a, b in pairs:
        if a not in results or b not in results:
            continue
        for metric in ("profit", "risk"):
            table = compare(results[a], results[b], metric)
            for fmt in formats:
                ext = "json" if fmt == "json" else "csv"
                emit_comparison(table, fmt, out / f"compare_{name}_{metric}.{ext}")


def _dump_solutions(cfg: RunConfig, data: YearData,
                    results: dict[int, ScenarioResult], out: Path) -> None:
    for sid, res in sorted(results.items()):
        scenario = scenario_from_id(sid, terminal_soc_rule=cfg.terminal_soc_rule,
                                    edr_mode=cfg.edr_mode)
        soc = np.full(cfg.system.n_smg, cfg.system.soc_max)
        for m, sol in enumerate(res.solutions or [], start=1):
            if sol is None:
                continue
            inst = build_month_instance(cfg.system, scenario, data.calendar[m - 1],
                                        data.profiles, data.tariff,
                                        data.cvd_table, soc)
            x = _solution_vector(inst, sol)
            write_solution_csv(out / f"scenario_{sid}_month_{m}_solution.csv",
                               inst, x)
            soc = sol.final_soc


def _solution_vector(inst, sol) -> np.ndarray:
    lay = inst.layout
    n, T = lay.n, lay.T
    x = np.zeros(inst.ncols)
    x[0:n * T] = sol.pv.reshape(-1)
    x[n * T:2 * n * T] = sol.wt.reshape(-1)
    x[2 * n * T:3 * n * T] = sol.bat.reshape(-1)
    x[3 * n * T:4 * n * T] = sol.soc.reshape(-1)
    for z in range(n):
        for y in range(n):
            x[lay.buy(z, y, 0):lay.buy(z, y, 0) + T] = sol.buy[z, y]
            x[lay.sell(z, y, 0):lay.sell(z, y, 0) + T] = sol.sell[z, y]
        x[lay.x_grid(z, 0):lay.x_grid(z, 0) + T] = sol.x[z, z]
    for q, (z, y) in enumerate(lay.internal_pairs()):
        x[lay.x_pair(q, 0):lay.x_pair(q, 0) + T] = sol.x[z, y]
    if inst.include_risk:
        for z in range(n):
            x[lay.risk(z)] = sol.risk[z]
            x[lay.w(z)] = sol.w[z]
    return x


def cmd_validate(args) -> int:
    cfg = load_run_config(args.config, seed=args.seed)
    data = _year_data(cfg)
    scenario = scenario_from_id(args.scenario,
                                terminal_soc_rule=cfg.terminal_soc_rule,
                                edr_mode=cfg.edr_mode)
    values = read_solution_values(args.solution)
    n = cfg.system.n_smg
    soc = np.array([values.get(f"initial_soc_{z + 1}", cfg.system.soc_max)
                    for z in range(n)])
    inst = build_month_instance(cfg.system, scenario, data.calendar[args.month - 1],
                                data.profiles, data.tariff, data.cvd_table, soc)
    x = np.zeros(inst.ncols)
    missing = []
    for j in range(inst.ncols):
        name = inst.var_name(j)
        if name in values:
            x[j] = values[name]
        else:
            missing.append(name)
    if missing:
        print(f"solution file lacks {len(missing)} variables "
              f"(first: {missing[:5]})", file=sys.stderr)
        return EXIT_ERROR
    sol = extract_solution(inst, x)
    # keep the file's own risk/W/profit claims instead of recomputed ones
    lay = inst.layout
    sol.risk = np.array([x[lay.risk(z)] for z in range(n)])
    sol.w = np.array([x[lay.w(z)] for z in range(n)])
    report = validate_solution(inst, sol, tol=args.tol)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_example_config(args) -> int:
    print(EXAMPLE_CONFIG, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgsched",
        description="Yearly scheduling of clustered renewable microgrids with "
                    "TOU pricing and downside-risk reporting.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write synthetic profile and tariff CSVs")
    p_synth.add_argument("--config", default=None)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="run scenarios and write reports")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--scenarios", default=None,
                       help="comma list from 1,2,3,4")
    p_run.add_argument("--architecture", choices=["mmg", "smg"], default=None)
    p_run.add_argument("--covid", choices=["on", "off"], default=None)
    p_run.add_argument("--edr-mode", dest="edr_mode",
                       choices=["hard", "report_only"], default=None)
    p_run.add_argument("--solver-mode", dest="solver_mode",
                       choices=["exact", "chunked"], default=None)
    p_run.add_argument("--chunk-hours", dest="chunk_hours", type=int, default=None)
    p_run.add_argument("--node-limit", dest="node_limit", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--dump-solutions", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a solution file against the model")
    p_val.add_argument("--config", default=None)
    p_val.add_argument("--seed", type=int, default=None)
    p_val.add_argument("--month", type=int, required=True)
    p_val.add_argument("--scenario", type=int, required=True)
    p_val.add_argument("--solution", required=True)
    p_val.add_argument("--tol", type=float, default=1e-6)
    p_val.set_defaults(func=cmd_validate)

    p_cfg = sub.add_parser("example-config", help="print an annotated config file")
    p_cfg.set_defaults(func=cmd_example_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MgschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
