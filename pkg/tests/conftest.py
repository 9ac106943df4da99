"""Shared fixtures: tiny random instances, the battery toy month, seed-1 year runs."""

from __future__ import annotations

import time

import numpy as np
import pytest

from mgsched.engine import run_scenarios, synthesize_year_data
from mgsched.model import build_horizon_instance
from mgsched.solver import SolverOptions
from mgsched.system import SystemSpec


def tiny_spec(n: int, rng: np.random.Generator | None = None) -> SystemSpec:
    """1- or 2-SMG system with parameters inside the studied envelopes."""
    if rng is None:
        if n == 1:
            return SystemSpec(n_smg=1, line_max=((16.0,),), bat_max=(2.0,),
                              bat_min=(-2.0,), base_power=(4.0,),
                              target=(150.0,), edr_cap=500.0)
        return SystemSpec(n_smg=2, line_max=((16.0, 8.0), (8.0, 4.0)),
                          bat_max=(2.0, 1.0), bat_min=(-2.0, -1.0),
                          base_power=(4.0, 2.0), target=(150.0, 250.0),
                          edr_cap=500.0)
    if n == 1:
        g = float(rng.uniform(2, 16))
        return SystemSpec(n_smg=1, line_max=((g,),), bat_max=(2.0,),
                          bat_min=(-2.0,), base_power=(4.0,),
                          target=(150.0,), edr_cap=500.0)
    g1, g2 = float(rng.uniform(2, 16)), float(rng.uniform(2, 8))
    i12 = float(rng.uniform(1, 8))
    return SystemSpec(n_smg=2, line_max=((g1, i12), (i12, g2)),
                      bat_max=(2.0, 1.0), bat_min=(-2.0, -1.0),
                      base_power=(4.0, 2.0), target=(150.0, 250.0),
                      edr_cap=500.0)


def random_tiny_instance(rng: np.random.Generator, edr_mode: str = "report_only"):
    """Random instance within the studied parameter envelopes, <= 24 binaries.

    2-SMG draws stay at 3 hours (11 binaries) so the exhaustive oracle's
    2^k enumeration stays affordable inside the suite's runtime budget.
    """
    n = int(rng.integers(1, 3))
    max_hours = 6 if n == 1 else 3
    T = int(rng.integers(1, max_hours + 1))
    spec = tiny_spec(n, rng)
    load = rng.uniform(0.0, 3.0, (n, T))
    pv = rng.uniform(0.0, 8.0, (n, T))
    wt = rng.uniform(0.0, 6.0, (n, T))
    buy = rng.uniform(0.02, 0.3, T)
    arch = "mmg" if n == 2 else "smg"
    soc0 = rng.uniform(0.2, 1.0, n)
    return build_horizon_instance(
        spec, arch, month=1, load=load, pv_max=pv, wt_max=wt, buy_price=buy,
        sell_grid_price=1.1 * buy, sell_int_price=buy,
        cvd=float(rng.uniform(0.92, 1.02)), initial_soc=soc0,
        include_risk=True, edr_mode=edr_mode)


def battery_toy_inputs(hours: int = 72, charge_hour: int = 12, sell_hour: int = 40):
    """A month where profit requires holding charge across chunk boundaries.

    Every hour has either a positive price or a load that saturates the grid
    line, so there is no free energy: charging is only worthwhile because of
    hour `sell_hour`'s higher price, which a 24-hour window cannot see from
    hour `charge_hour`. Exact and chunked objectives then differ strictly,
    and the sparse positive prices keep the exact search tree small.
    """
    spec = tiny_spec(1)
    load = np.full((1, hours), 16.0)
    load[0, charge_hour] = 0.0
    load[0, sell_hour] = 0.0
    prices = np.zeros(hours)
    prices[charge_hour] = 0.05
    prices[sell_hour] = 0.2
    pv = np.zeros((1, hours))
    wt = np.zeros((1, hours))
    return spec, dict(month=1, load=load, pv_max=pv, wt_max=wt,
                      buy_price=prices, sell_grid_price=1.1 * prices,
                      sell_int_price=prices, cvd=1.0,
                      initial_soc=np.array([0.2]), edr_mode="report_only")


class TimedRuns:
    """Seed-1 four-scenario chunked year run, shared across acceptance tests."""

    def __init__(self, data):
        self.data = data
        t0 = time.perf_counter()
        self.results = run_scenarios(
            SystemSpec(), [1, 2, 3, 4], self.data,
            SolverOptions(mode="chunked", node_limit=1), edr_mode="report_only")
        self.elapsed = time.perf_counter() - t0


@pytest.fixture(scope="session")
def seed1_data():
    return synthesize_year_data()


@pytest.fixture(scope="session")
def seed1_runs(seed1_data) -> TimedRuns:
    return TimedRuns(seed1_data)


_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in str(item.fspath):
        label = item.function.__doc__ or item.name
        _ACCEPTANCE_RESULTS.append((label.strip().splitlines()[0],
                                    "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for label, status in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status}  {label}")
