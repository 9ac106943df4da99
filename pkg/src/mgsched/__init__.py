"""Yearly MIP scheduling of clustered renewable microgrids.

Builds and solves the monthly mixed-integer dispatch problem of three
grid-connected renewable microgrids, clustered (MMG) or isolated (SMG), with
or without the pandemic demand scaling, and reports monthly profit and
downside risk.
"""

__version__ = "0.1.0"

from .demand import (DemandConfig, DemandFunction, TariffSchedule,
                     build_demand_suite, build_tariff, classify_elasticity,
                     fit_demand_function, point_elasticity, price_from_load)
from .engine import (ComparisonTable, ScenarioResult, YearData,
                     build_year_data, compare, emit_report, run_scenario,
                     run_scenarios, synthesize_year_data)
from .errors import (BuildError, DomainError, MgschedError, SchemaError,
                     SolverError, SolverNumericsError)
from .lp import Basis, LinearProgram, LpSolution, solve_lp
from .model import (MonthlyInstance, ScheduleSolution, build_horizon_instance,
                    build_month_instance, extract_solution, profit_accounting,
                    validate_solution)
from .profiles import (CovidFactorTable, HourlyProfile, MonthCalendar,
                       SynthesisSpec, build_year_calendar, covid_factor,
                       load_profile_csv, synthesize_year, write_profile_csv)
from .solver import (MipResult, MonthSolveResult, SolveContext, SolverOptions,
                     brute_force_mip, solve_mip, solve_month,
                     solve_month_chunked)
from .system import ScenarioConfig, SystemSpec, scenario_from_id
