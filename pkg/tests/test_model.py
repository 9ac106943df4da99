"""Instance assembly, solution validation and profit accounting."""

import numpy as np
import pytest

from mgsched.demand import TariffSchedule
from mgsched.errors import BuildError, DomainError
from mgsched.model import (build_horizon_instance, build_month_instance,
                           extract_solution, profit_accounting,
                           validate_solution)
from mgsched.profiles import (CovidFactorTable, HourlyProfile, MONTH_HOURS,
                              build_year_calendar)
from mgsched.solver import SolverOptions, solve_mip
from mgsched.system import ScenarioConfig, SystemSpec

from conftest import tiny_spec


def _one_hour_instance(**kw):
    spec = tiny_spec(1)
    args = dict(month=1, load=[[2.0]], pv_max=[[5.0]], wt_max=[[0.0]],
                buy_price=[0.1], sell_grid_price=[0.11], sell_int_price=[0.1],
                cvd=1.0, initial_soc=[1.0], include_risk=True,
                edr_mode="report_only")
    args.update(kw)
    return build_horizon_instance(spec, "smg", **args)


class TestCounting:
    def test_one_hour_one_smg_variables(self):
        inst = _one_hour_instance()
        # continuous: pv, wt, bat, soc, buy, sell, risk; binary: X_grid, W
        assert inst.ncols == 9
        assert len(inst.binaries) == 2
        kinds = sorted(g.kind for g in inst.binaries)
        assert kinds == ["flag", "grid"]

    def test_mmg_binary_count_formula(self):
        spec = SystemSpec()
        for T in (1, 3, 8):
            load = np.ones((3, T))
            inst = build_horizon_instance(
                spec, "mmg", month=1, load=load, pv_max=2 * load,
                wt_max=load, buy_price=np.full(T, 0.1),
                sell_grid_price=np.full(T, 0.11), sell_int_price=np.full(T, 0.1),
                cvd=1.0, initial_soc=np.full(3, 0.5), include_risk=True,
                edr_mode="report_only")
            # three grid lines + three shared internal pairs per hour, plus W_z
            assert len(inst.binaries) == 6 * T + 3

    def test_smg_architecture_pins_internal_trades(self):
        spec = SystemSpec()
        T = 4
        load = np.ones((3, T))
        inst = build_horizon_instance(
            spec, "smg", month=1, load=load, pv_max=2 * load, wt_max=load,
            buy_price=np.full(T, 0.1), sell_grid_price=np.full(T, 0.11),
            sell_int_price=np.full(T, 0.1), cvd=1.0,
            initial_soc=np.full(3, 0.5), include_risk=True,
            edr_mode="report_only")
        lay = inst.layout
        for z in range(3):
            for y in range(3):
                if z == y:
                    continue
                for t in range(T):
                    assert inst.ub[lay.buy(z, y, t)] == 0.0
                    assert inst.ub[lay.sell(z, y, t)] == 0.0

    def test_build_time_errors(self):
        with pytest.raises(BuildError):
            _one_hour_instance(initial_soc=[0.1])      # below soc_min
        with pytest.raises(BuildError):
            _one_hour_instance(load=[[-1.0]])
        with pytest.raises(BuildError):
            _one_hour_instance(buy_price=[-0.1])
        with pytest.raises(BuildError):
            _one_hour_instance(cvd=0.0)


class TestValidator:
    def _solved(self):
        inst = _one_hour_instance()
        res = solve_mip(inst, SolverOptions())
        return inst, extract_solution(inst, res.x)

    def test_clean_solution_passes(self):
        inst, sol = self._solved()
        assert validate_solution(inst, sol).ok

    def test_zero_dispatch_zero_load_is_valid(self):
        # an all-zero dispatch (battery idle at its starting charge) with no
        # load is feasible: no profit, full target shortfall, W = 1
        inst = _one_hour_instance(load=[[0.0]], pv_max=[[0.0]])
        x = np.zeros(inst.ncols)
        lay = inst.layout
        x[lay.soc(0, 0)] = 1.0          # initial_soc, battery untouched
        x[lay.x_grid(0, 0)] = 1.0
        x[lay.risk(0)] = 150.0
        x[lay.w(0)] = 1.0
        sol = extract_solution(inst, x)
        report = validate_solution(inst, sol)
        assert report.ok, report.summary()
        assert sol.of[0] == pytest.approx(0.0, abs=1e-9)
        assert sol.risk[0] == pytest.approx(150.0, abs=1e-9)   # target shortfall
        assert sol.w[0] == 1.0

    def test_simultaneous_buy_sell_reported(self):
        inst, sol = self._solved()
        sol.buy[0, 0, 0] = 1.0
        sol.sell[0, 0, 0] = 1.0
        report = validate_solution(inst, sol)
        assert any(v.constraint == "complementarity" for v in report.violations)

    def test_soc_perturbation_single_violation(self):
        spec = tiny_spec(1)
        T = 5
        inst = build_horizon_instance(
            spec, "smg", month=1, load=np.ones((1, T)), pv_max=np.full((1, T), 3.0),
            wt_max=np.zeros((1, T)), buy_price=np.full(T, 0.1),
            sell_grid_price=np.full(T, 0.11), sell_int_price=np.full(T, 0.1),
            cvd=1.0, initial_soc=[0.6], include_risk=True, edr_mode="report_only")
        res = solve_mip(inst, SolverOptions())
        sol = extract_solution(inst, res.x)
        assert validate_solution(inst, sol).ok
        tol = 1e-6
        sol.soc[0, 2] += 2 * tol
        report = validate_solution(inst, sol, tol=tol)
        rec = [v for v in report.violations if v.constraint == "soc_recurrence"]
        # the perturbed entry breaks its own recurrence and the next hour's
        assert len(rec) == 2
        sol.soc[0, 2] -= 2 * tol
        sol.soc[0, T - 1] += 2 * tol
        report = validate_solution(inst, sol, tol=tol)
        rec = [v for v in report.violations if v.constraint == "soc_recurrence"]
        assert len(rec) == 1

    def test_balance_violation_detected(self):
        inst, sol = self._solved()
        sol.pv[0, 0] += 0.5
        report = validate_solution(inst, sol)
        assert any(v.constraint == "balance" for v in report.violations)

    def test_risk_identity_violation_detected(self):
        inst, sol = self._solved()
        sol.risk[0] += 1.0
        report = validate_solution(inst, sol)
        assert any(v.constraint.startswith("risk") for v in report.violations)


class TestAccounting:
    def _tariff(self):
        buy = tuple(np.full(MONTH_HOURS[m], 0.1) for m in range(12))
        return TariffSchedule(buy=buy, sell_bonus=1.1)

    def _empty_solution(self, n=2, T=3):
        spec = tiny_spec(n)
        load = np.zeros((n, T))
        inst = build_horizon_instance(
            spec, "mmg" if n == 2 else "smg", month=1, load=load, pv_max=load,
            wt_max=load, buy_price=np.full(T, 0.1),
            sell_grid_price=np.full(T, 0.11), sell_int_price=np.full(T, 0.1),
            cvd=1.0, initial_soc=np.full(n, 0.5), include_risk=True,
            edr_mode="report_only")
        return inst, extract_solution(inst, np.zeros(inst.ncols))

    def test_no_trades_zero_profit(self):
        inst, sol = self._empty_solution()
        of, total = profit_accounting(sol, self._tariff())
        assert np.allclose(of, 0.0)
        assert total == 0.0

    def test_internal_transfer_cancels(self):
        inst, sol = self._empty_solution()
        sol.sell[0, 1, 0] = 1.0   # SMG1 sells 1 kWh to SMG2
        sol.buy[1, 0, 0] = 1.0
        of, total = profit_accounting(sol, self._tariff())
        assert of[0] == pytest.approx(0.1, abs=1e-12)
        assert of[1] == pytest.approx(-0.1, abs=1e-12)
        assert total == pytest.approx(0.0, abs=1e-12)

    def test_grid_sell_earns_bonus(self):
        inst, sol = self._empty_solution()
        sol.sell[0, 0, 0] = 1.0
        of, total = profit_accounting(sol, self._tariff())
        assert of[0] == pytest.approx(0.11, abs=1e-12)
        assert total == pytest.approx(0.11, abs=1e-12)

    def test_aggregate_equals_grid_flows_only(self):
        rng = np.random.default_rng(2)
        inst, sol = self._empty_solution()
        sol.sell[0, 1] = rng.uniform(0, 2, 3)
        sol.buy[1, 0] = sol.sell[0, 1]
        sol.sell[1, 0] = rng.uniform(0, 2, 3)
        sol.buy[0, 1] = sol.sell[1, 0]
        sol.sell[0, 0] = rng.uniform(0, 2, 3)
        sol.buy[1, 1] = rng.uniform(0, 2, 3)
        tariff = self._tariff()
        of, total = profit_accounting(sol, tariff)
        grid_only = (sol.sell[0, 0].sum() * 0.11 + sol.sell[1, 1].sum() * 0.11
                     - sol.buy[0, 0].sum() * 0.1 - sol.buy[1, 1].sum() * 0.1)
        assert total == pytest.approx(grid_only, abs=1e-9)

    def test_objective_matches_accounting_on_solved_instance(self, seed1_data):
        spec = SystemSpec()
        scenario = ScenarioConfig(architecture="mmg", covid=False,
                                  edr_mode="report_only")
        cal = seed1_data.calendar[0]
        inst = build_month_instance(spec, scenario, cal, seed1_data.profiles,
                                    seed1_data.tariff, seed1_data.cvd_table,
                                    np.full(3, 1.0))
        # objective vector agrees with the independent accounting on a
        # random feasible-ish vector restricted to the trade columns
        rng = np.random.default_rng(4)
        x = np.zeros(inst.ncols)
        lay = inst.layout
        for z in range(3):
            for y in range(3):
                x[lay.buy(z, y, 0):lay.buy(z, y, 0) + cal.hours] = rng.uniform(
                    0, 1, cal.hours)
                x[lay.sell(z, y, 0):lay.sell(z, y, 0) + cal.hours] = rng.uniform(
                    0, 1, cal.hours)
        sol = extract_solution(inst, x)
        of, total = profit_accounting(sol, seed1_data.tariff)
        assert float(inst.c @ x) == pytest.approx(total, rel=1e-9)
        assert np.allclose(of, sol.of, rtol=1e-9)


class TestMonthWrapper:
    def test_build_month_instance_slices_year(self, seed1_data):
        spec = SystemSpec()
        scenario = ScenarioConfig(architecture="mmg", covid=True,
                                  edr_mode="report_only")
        cal = seed1_data.calendar[4]   # May
        inst = build_month_instance(spec, scenario, cal, seed1_data.profiles,
                                    seed1_data.tariff, seed1_data.cvd_table,
                                    np.full(3, 1.0))
        assert inst.hours == cal.hours
        assert inst.cvd == 0.924
        want = seed1_data.profiles[("load", 1)].values[
            sum(MONTH_HOURS[:4]):sum(MONTH_HOURS[:5])]
        assert np.array_equal(inst.load[0], want)

    def test_covid_off_uses_unit_factor(self, seed1_data):
        spec = SystemSpec()
        scenario = ScenarioConfig(architecture="mmg", covid=False,
                                  edr_mode="report_only")
        inst = build_month_instance(spec, scenario, seed1_data.calendar[0],
                                    seed1_data.profiles, seed1_data.tariff,
                                    seed1_data.cvd_table, np.full(3, 1.0))
        assert inst.cvd == 1.0
