"""Demand-function fitting, elasticity, the 10-function suite, and the tariff."""

import numpy as np
import pytest

from mgsched.demand import (DemandConfig, TariffSchedule, average_function,
                            build_demand_suite, build_month_suites,
                            build_tariff, classify_elasticity,
                            fit_demand_function, point_elasticity,
                            price_from_load, read_tariff_csv, write_tariff_csv)
from mgsched.errors import DomainError
from mgsched.profiles import MONTH_HOURS, build_year_calendar


class TestFit:
    def test_reference_fit(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")
        assert f.slope_b == pytest.approx(-12.0, abs=1e-12)
        assert f.intercept_A == pytest.approx(11.2, abs=1e-12)

    def test_perfectly_inelastic(self):
        f = fit_demand_function(0.0, 10.0, 0.10, "off_peak")
        assert f.slope_b == 0.0
        assert f.intercept_A == 10.0

    def test_anchor_identity(self):
        f = fit_demand_function(-0.09, 7.3, 0.13, "on_peak")
        assert f.quantity(0.13) == pytest.approx(7.3, rel=1e-12)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            fit_demand_function(-0.1, 0.0, 0.1, "on_peak")
        with pytest.raises(DomainError):
            fit_demand_function(-0.1, 10.0, -0.1, "on_peak")
        with pytest.raises(DomainError):
            fit_demand_function(0.1, 10.0, 0.1, "on_peak")


class TestElasticity:
    def test_anchor_elasticity_recovered(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")
        assert point_elasticity(f, 0.10) == pytest.approx(-0.12, abs=1e-12)

    def test_flat_demand_inelastic(self):
        f = fit_demand_function(0.0, 10.0, 0.10, "on_peak")
        assert point_elasticity(f, 0.2) == 0.0
        assert classify_elasticity(0.0) == "inelastic"

    def test_hand_computed_point(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")  # A=11.2, b=-12
        eps = point_elasticity(f, 0.2)
        assert eps == pytest.approx(-12 * 0.2 / 8.8, abs=1e-12)
        assert eps == pytest.approx(-0.2727272727, abs=1e-9)

    def test_zero_demand_error(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")
        with pytest.raises(DomainError):
            point_elasticity(f, 1.0)  # A + b*1.0 = -0.8 < 0

    def test_classification_bands(self):
        assert classify_elasticity(-1.5) == "elastic"
        assert classify_elasticity(-1.0) == "unit"
        assert classify_elasticity(-0.3) == "inelastic"


class TestSuite:
    def test_ten_functions_five_levels_two_segments(self):
        suite = build_demand_suite(3, 10.0, 1.0, 0.12)
        assert len(suite) == 10
        on = [f for f in suite if f.segment == "on_peak"]
        off = [f for f in suite if f.segment == "off_peak"]
        assert len(on) == len(off) == 5
        assert sorted(f.anchor_load for f in on) == [8.0, 9.0, 10.0, 11.0, 12.0]
        assert sorted(f.consumer_level for f in on) == [-2, -1, 0, 1, 2]

    def test_zero_std_collapses_anchors(self):
        suite = build_demand_suite(1, 10.0, 0.0, 0.12)
        assert len(suite) == 10
        assert {f.anchor_load for f in suite} == {10.0}
        # two distinct functions remain (one per segment)
        assert len({(f.intercept_A, f.slope_b) for f in suite}) == 2

    def test_default_elasticity_assignment(self):
        suite = build_demand_suite(1, 10.0, 1.0, 0.12)
        for f in suite:
            expected = -0.08 if f.segment == "on_peak" else -0.16
            assert f.elasticity == expected
            assert abs(f.elasticity) < 1.0   # inelastic consumers

    def test_invariants_recomputed_independently(self):
        # re-derive slope/intercept from the definition for every member
        rng = np.random.default_rng(17)
        for _ in range(50):
            avg = float(rng.uniform(1, 50))
            std = float(rng.uniform(0, 0.45 * avg))
            price = float(rng.uniform(0.03, 0.4))
            suite = build_demand_suite(int(rng.integers(1, 13)), avg, std, price)
            for f in suite:
                slope = f.elasticity * f.anchor_load / f.anchor_price
                assert f.slope_b == pytest.approx(slope, rel=1e-9)
                assert f.intercept_A + f.slope_b * f.anchor_price == pytest.approx(
                    f.anchor_load, rel=1e-9)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            build_demand_suite(1, 10.0, 5.5, 0.12)  # avg <= 2*std
        with pytest.raises(DomainError):
            build_demand_suite(0, 10.0, 1.0, 0.12)


class TestInversion:
    def test_inverse_of_anchor(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")
        price, clamped = price_from_load(f, 10.0)
        assert price == pytest.approx(0.10, abs=1e-12)
        assert not clamped

    def test_intercept_maps_to_zero_price(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")
        price, clamped = price_from_load(f, f.intercept_A)
        assert price == pytest.approx(0.0, abs=1e-12)
        assert not clamped

    def test_clamped_above_intercept(self):
        f = fit_demand_function(-0.12, 10.0, 0.10, "on_peak")
        price, clamped = price_from_load(f, f.intercept_A + 1.0)
        assert price == 0.0
        assert clamped

    def test_inelastic_has_no_inverse(self):
        f = fit_demand_function(0.0, 10.0, 0.10, "on_peak")
        with pytest.raises(DomainError):
            price_from_load(f, 10.0)

    def test_round_trip_over_price_range(self):
        f = fit_demand_function(-0.13, 8.0, 0.11, "off_peak")
        top = f.intercept_A / (-f.slope_b)
        for c in np.linspace(0.0, top, 31):
            price, _ = price_from_load(f, f.quantity(c))
            assert price == pytest.approx(c, abs=1e-9)


def _flat_load_year(level: float = 5.0) -> np.ndarray:
    return np.full(8760, level)


class TestTariff:
    def test_constant_load_constant_prices(self):
        cal = build_year_calendar()
        load = _flat_load_year()
        cfg = DemandConfig()
        suites = build_month_suites(cal, load, cfg)
        tariff = build_tariff(cal, load, suites, cfg)
        for m in range(1, 13):
            prices = tariff.buy_price(m)
            assert np.allclose(prices, prices[0], atol=1e-12)

    def test_sell_bonus_scaling(self):
        cal = build_year_calendar()
        load = _flat_load_year()
        cfg = DemandConfig()
        suites = build_month_suites(cal, load, cfg)
        t1 = build_tariff(cal, load, suites, cfg, sell_bonus=1.1)
        t2 = build_tariff(cal, load, suites, cfg, sell_bonus=2.2)
        for m in range(1, 13):
            assert np.array_equal(t1.buy_price(m), t2.buy_price(m))
            assert np.allclose(t2.sell_grid_price(m), 2.0 * t1.sell_grid_price(m))

    def test_grid_sell_ratio_exact(self):
        cal = build_year_calendar()
        rng = np.random.default_rng(5)
        load = rng.uniform(2, 9, 8760)
        cfg = DemandConfig()
        suites = build_month_suites(cal, load, cfg)
        tariff = build_tariff(cal, load, suites, cfg)
        for m in range(1, 13):
            buy = tariff.buy_price(m)
            assert np.array_equal(tariff.sell_grid_price(m), 1.1 * buy)
            assert np.array_equal(tariff.sell_internal_price(m), buy)
            assert np.all(buy >= 0.0)

    def test_onpeak_prices_dominate_with_onpeak_heavy_load(self):
        cal = build_year_calendar()
        # strictly higher load in every on-peak hour
        load = np.full(8760, 4.0)
        pos = 0
        for c in cal:
            load[pos:pos + c.hours][c.onpeak_mask] = 7.0
            pos += c.hours
        cfg = DemandConfig()
        suites = build_month_suites(cal, load, cfg)
        tariff = build_tariff(cal, load, suites, cfg)
        pos = 0
        for c in cal:
            prices = tariff.buy_price(c.month_index)
            on = prices[c.onpeak_mask]
            off = prices[~c.onpeak_mask]
            assert on.min() >= off.max() - 1e-12
            pos += c.hours

    def test_csv_round_trip(self, tmp_path):
        cal = build_year_calendar()
        rng = np.random.default_rng(9)
        load = rng.uniform(2, 9, 8760)
        cfg = DemandConfig()
        tariff = build_tariff(cal, load, build_month_suites(cal, load, cfg), cfg)
        path = tmp_path / "tariff.csv"
        write_tariff_csv(path, tariff)
        back = read_tariff_csv(path)
        for m in range(1, 13):
            assert np.array_equal(back.buy_price(m), tariff.buy_price(m))

    def test_schedule_validation(self):
        with pytest.raises(DomainError):
            TariffSchedule(buy=tuple(np.zeros(10) for _ in range(12)))
        good = tuple(np.zeros(MONTH_HOURS[m]) for m in range(12))
        with pytest.raises(DomainError):
            TariffSchedule(buy=good, sell_bonus=1.0)
