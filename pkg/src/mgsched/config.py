"""Run configuration: INI config file, CLI overrides, typed validation.

System parameter overrides are validated by constructing the actual
SystemSpec / DemandConfig / SolverOptions objects at load time, so a bad
override fails before any solving starts. The format is documented in the
bundled example (see README) and versioned via `schema_version`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .demand import DemandConfig
from .errors import SchemaError
from .profiles import CovidFactorTable, SynthesisSpec
from .solver import SolverOptions
from .system import SystemSpec

CONFIG_SCHEMA_VERSION = 1

EXAMPLE_CONFIG = """\
; mgsched run configuration (schema_version 1)
; every key is optional; the values below are the defaults.

[run]
schema_version = 1
scenarios = 1,2,3,4          ; study numbering: 1=MMG+covid .. 4=SMG plain
edr_mode = report_only       ; hard | report_only
terminal_soc = free          ; free | return_to_initial
solver_mode = chunked        ; chunked | exact
chunk_hours = 24
node_limit = 1               ; branch-and-bound budget per solve
out_dir = out
report_format = both         ; csv | json | both
dump_solutions = false       ; write per-month solution CSVs

[data]
; synthetic data (default), or explicit CSV paths below
seed = 1
start_weekday = 0            ; weekday of Jan 1, 0=Monday .. 6=Sunday
annual_load_kwh = 60000
gen_to_load_ratio = 1.25
pv_energy_share = 0.40
covid_table = pandemic2020   ; pandemic2020 | identity
; load_1 = data/load_smg1.csv   (set all 9 paths to use CSV ingestion)
; pv_1 = data/pv_smg1.csv
; wt_1 = data/wt_smg1.csv  ... likewise _2 and _3

[demand]
base_price = 0.12            ; $/kWh anchor, scalar or 12 comma values
elasticity_off_peak = -0.16
elasticity_on_peak = -0.08
load_coupling = 0.1
sell_bonus = 1.1

[system]
; Table-style parameter overrides; unlisted keys keep their defaults
; line_max_1_1 = 16   line_max_1_2 = 8   (indices are SMG numbers)
; bat_max_1 = 2       (bat_min is always the negative of bat_max)
; base_power_1 = 4    target_1 = 150     edr_cap = 500
; soc_min = 0.2       soc_max = 1.0      big_m = (derived when unset)
"""


@dataclass
class RunConfig:
    scenarios: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    edr_mode: str = "report_only"
    terminal_soc_rule: str = "free"
    out_dir: str = "out"
    report_format: str = "both"
    dump_solutions: bool = False
    system: SystemSpec = field(default_factory=SystemSpec)
    demand: DemandConfig = field(default_factory=DemandConfig)
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(
        mode="chunked", node_limit=1))
    synthesis: SynthesisSpec = field(default_factory=SynthesisSpec)
    profile_paths: dict[tuple[str, int], str] | None = None
    covid_table: str = "pandemic2020"
    sell_bonus: float = 1.1

    def cvd_table(self) -> CovidFactorTable:
        if self.covid_table == "identity":
            return CovidFactorTable.identity()
        return CovidFactorTable.pandemic_2020()


def _parse_scenarios(text: str) -> list[int]:
    try:
        ids = [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise SchemaError(f"bad scenario list {text!r}") from None
    if not ids or any(i not in (1, 2, 3, 4) for i in ids):
        raise SchemaError(f"scenario ids must be within 1..4, got {text!r}")
    out: list[int] = []
    for i in ids:   # dedupe, keep order
        if i not in out:
            out.append(i)
    return out


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise SchemaError(f"expected a boolean, got {text!r}")


def _system_overrides(section) -> SystemSpec:
    kwargs = {}
    base = SystemSpec()
    line = [list(row) for row in base.line_max]
    bat_max = list(base.bat_max)
    base_power = list(base.base_power)
    target = list(base.target)
    touched_line = touched_bat = touched_s = touched_t = False
    for key, raw in section.items():
        try:
            if key.startswith("line_max_"):
                _, _, zy = key.partition("line_max_")
                z, y = (int(p) for p in zy.split("_"))
                line[z - 1][y - 1] = float(raw)
                line[y - 1][z - 1] = float(raw)
                touched_line = True
            elif key.startswith("bat_max_"):
                bat_max[int(key.rsplit("_", 1)[1]) - 1] = float(raw)
                touched_bat = True
            elif key.startswith("base_power_"):
                base_power[int(key.rsplit("_", 1)[1]) - 1] = float(raw)
                touched_s = True
            elif key.startswith("target_") and key != "target_total":
                target[int(key.rsplit("_", 1)[1]) - 1] = float(raw)
                touched_t = True
            elif key in ("soc_min", "soc_max", "edr_cap", "target_total", "big_m"):
                kwargs[key] = float(raw)
            else:
                raise SchemaError(f"unknown [system] key {key!r}")
        except (ValueError, IndexError):
            raise SchemaError(f"bad [system] override {key} = {raw!r}") from None
    if touched_line:
        kwargs["line_max"] = tuple(tuple(r) for r in line)
    if touched_bat:
        kwargs["bat_max"] = tuple(bat_max)
        kwargs["bat_min"] = tuple(-b for b in bat_max)
    if touched_s:
        kwargs["base_power"] = tuple(base_power)
    if touched_t:
        kwargs["target"] = tuple(target)
    return SystemSpec(**kwargs)


def load_run_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from an optional INI file plus keyword overrides.

    Recognized overrides (all optional): seed, scenarios, architecture,
    covid, edr_mode, solver_mode, out_dir, chunk_hours, node_limit.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise SchemaError(f"config file {path} does not exist")
        parser.read(path)

    run = parser["run"] if parser.has_section("run") else {}
    data = parser["data"] if parser.has_section("data") else {}
    dem = parser["demand"] if parser.has_section("demand") else {}

    if "schema_version" in run and int(run["schema_version"]) != CONFIG_SCHEMA_VERSION:
        raise SchemaError(f"unsupported config schema_version {run['schema_version']}")

    scenarios = _parse_scenarios(run.get("scenarios", "1,2,3,4"))
    edr_mode = run.get("edr_mode", "report_only").strip()
    terminal = run.get("terminal_soc", "free").strip()
    out_dir = run.get("out_dir", "out").strip()
    fmt = run.get("report_format", "both").strip()
    dump = _parse_bool(run.get("dump_solutions", "false"))
    solver = SolverOptions(mode=run.get("solver_mode", "chunked").strip(),
                           chunk_hours=int(run.get("chunk_hours", "24")),
                           node_limit=int(run.get("node_limit", "1")))

    base_price_raw = dem.get("base_price", "0.12")
    parts = [float(p) for p in base_price_raw.replace(" ", "").split(",") if p]
    base_price = tuple(parts * 12) if len(parts) == 1 else tuple(parts)
    demand = DemandConfig(
        base_price=base_price,
        elasticity_range=(float(dem.get("elasticity_off_peak", "-0.16")),
                          float(dem.get("elasticity_on_peak", "-0.08"))),
        load_coupling=float(dem.get("load_coupling", "0.1")))
    sell_bonus = float(dem.get("sell_bonus", "1.1"))

    synthesis = SynthesisSpec(
        seed=int(data.get("seed", "1")),
        start_weekday=int(data.get("start_weekday", "0")),
        annual_load_kwh=float(data.get("annual_load_kwh", "60000")),
        gen_to_load_ratio=float(data.get("gen_to_load_ratio", "1.25")),
        pv_energy_share=float(data.get("pv_energy_share", "0.40")))
    covid_table = data.get("covid_table", "pandemic2020").strip()
    if covid_table not in ("pandemic2020", "identity"):
        raise SchemaError(f"covid_table must be pandemic2020 or identity, "
                          f"got {covid_table!r}")

    profile_paths = None
    path_keys = [(kind, z) for kind in ("load", "pv", "wt") for z in (1, 2, 3)]
    present = [k for k in path_keys if f"{k[0]}_{k[1]}" in data]
    if present:
        if len(present) != len(path_keys):
            missing = [f"{k}_{z}" for k, z in path_keys if (k, z) not in present]
            raise SchemaError(f"partial CSV data source; missing keys: {missing}")
        kind_map = {"load": "load", "pv": "pv_max", "wt": "wt_max"}
        profile_paths = {(kind_map[k], z): data[f"{k}_{z}"] for k, z in path_keys}

    system = _system_overrides(parser["system"]) if parser.has_section("system") \
        else SystemSpec()

    cfg = RunConfig(scenarios=scenarios, edr_mode=edr_mode,
                    terminal_soc_rule=terminal, out_dir=out_dir,
                    report_format=fmt, dump_solutions=dump, system=system,
                    demand=demand, solver=solver, synthesis=synthesis,
                    profile_paths=profile_paths, covid_table=covid_table,
                    sell_bonus=sell_bonus)
    return apply_overrides(cfg, **overrides)


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    ov = {k: v for k, v in overrides.items() if v is not None}
    if "seed" in ov:
        cfg.synthesis = SynthesisSpec(
            seed=int(ov["seed"]), start_weekday=cfg.synthesis.start_weekday,
            annual_load_kwh=cfg.synthesis.annual_load_kwh,
            gen_to_load_ratio=cfg.synthesis.gen_to_load_ratio,
            pv_energy_share=cfg.synthesis.pv_energy_share)
        cfg.profile_paths = None   # an explicit seed selects synthetic data
    if "scenarios" in ov:
        cfg.scenarios = _parse_scenarios(ov["scenarios"]) \
            if isinstance(ov["scenarios"], str) else list(ov["scenarios"])
    if "architecture" in ov:
        arch = ov["architecture"].lower()
        if arch not in ("mmg", "smg"):
            raise SchemaError(f"architecture must be mmg or smg, got {arch!r}")
        keep = (1, 2) if arch == "mmg" else (3, 4)
        cfg.scenarios = [s for s in cfg.scenarios if s in keep]
    if "covid" in ov:
        on = _parse_bool(ov["covid"]) if isinstance(ov["covid"], str) else bool(ov["covid"])
        keep = (1, 3) if on else (2, 4)
        cfg.scenarios = [s for s in cfg.scenarios if s in keep]
    if not cfg.scenarios:
        raise SchemaError("scenario selection is empty after filters")
    if "edr_mode" in ov:
        cfg.edr_mode = ov["edr_mode"]
    if "out_dir" in ov:
        cfg.out_dir = ov["out_dir"]
    if "solver_mode" in ov or "chunk_hours" in ov or "node_limit" in ov:
        cfg.solver = SolverOptions(
            mode=ov.get("solver_mode", cfg.solver.mode),
            chunk_hours=int(ov.get("chunk_hours", cfg.solver.chunk_hours)),
            node_limit=int(ov.get("node_limit", cfg.solver.node_limit)),
            feasibility_tol=cfg.solver.feasibility_tol,
            integrality_tol=cfg.solver.integrality_tol,
            optimality_gap=cfg.solver.optimality_gap)
    if cfg.edr_mode not in ("hard", "report_only"):
        raise SchemaError(f"edr_mode must be hard or report_only, got {cfg.edr_mode!r}")
    if cfg.report_format not in ("csv", "json", "both"):
        raise SchemaError(f"report_format must be csv, json or both")
    return cfg
