"""Stylized short-run electricity demand model and the TOU price schedule it induces.

Demand is linear, PL(C) = A + b*C with b = eps * PL0 / C0 <= 0, anchored so
the fitted function passes through the observed (C0, PL0) point. Ten
functions per month: five consumer levels (avg plus/minus one and two
standard deviations) times two TOU segments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SchemaError
from .profiles import MONTH_HOURS, MonthCalendar

SEGMENTS = ("on_peak", "off_peak")
CONSUMER_LEVELS = (-2, -1, 0, 1, 2)

_REL_TOL = 1e-9


@dataclass(frozen=True)
class DemandFunction:
    """Linear demand PL(C) = intercept_A + slope_b * C for one consumer/segment."""

    intercept_A: float          # kWh
    slope_b: float              # kWh per ($/kWh), <= 0
    elasticity: float           # dimensionless, <= 0
    anchor_load: float          # kWh
    anchor_price: float         # $/kWh
    segment: str
    consumer_level: int         # offset from the average, in standard deviations

    def __post_init__(self):
        if self.segment not in SEGMENTS:
            raise DomainError(f"unknown segment {self.segment!r}")
        if self.slope_b > 0:
            raise DomainError(f"slope_b must be <= 0, got {self.slope_b}")
        anchor = self.intercept_A + self.slope_b * self.anchor_price
        if abs(anchor - self.anchor_load) > _REL_TOL * max(1.0, abs(self.anchor_load)):
            raise DomainError("anchor identity A + b*C0 = PL0 violated")
        slope = self.elasticity * self.anchor_load / self.anchor_price
        if abs(slope - self.slope_b) > _REL_TOL * max(1.0, abs(self.slope_b)):
            raise DomainError("slope identity b = eps*PL0/C0 violated")

    def quantity(self, price: float) -> float:
        """Demanded quantity at a price."""
        return self.intercept_A + self.slope_b * price


def fit_demand_function(elasticity: float, anchor_load: float, anchor_price: float,
                        segment: str, level: int = 0) -> DemandFunction:
    """Fit the linear demand function from an elasticity and an anchor point."""
    if anchor_load <= 0:
        raise DomainError(f"anchor_load must be > 0, got {anchor_load}")
    if anchor_price <= 0:
        raise DomainError(f"anchor_price must be > 0, got {anchor_price}")
    if elasticity > 0:
        raise DomainError(f"elasticity must be <= 0, got {elasticity}")
    slope = elasticity * anchor_load / anchor_price
    intercept = anchor_load - slope * anchor_price
    return DemandFunction(intercept_A=intercept, slope_b=slope, elasticity=elasticity,
                          anchor_load=anchor_load, anchor_price=anchor_price,
                          segment=segment, consumer_level=level)


def point_elasticity(f: DemandFunction, price: float) -> float:
    """Elasticity b*C/PL(C) at a price; demand must be positive there."""
    q = f.quantity(price)
    if q <= 0:
        raise DomainError(f"demand is {q} at price {price}; elasticity undefined")
    return f.slope_b * price / q


def classify_elasticity(eps: float, tol: float = 1e-12) -> str:
    """'elastic', 'unit' or 'inelastic' by |eps| versus 1."""
    a = abs(eps)
    if abs(a - 1.0) <= tol:
        return "unit"
    return "elastic" if a > 1.0 else "inelastic"


def build_demand_suite(month: int, avg_load: float, load_std: float, avg_price: float,
                       elasticity_range: tuple[float, float] = (-0.16, -0.08),
                       ) -> tuple[DemandFunction, ...]:
    """The month's 10 demand functions: 5 consumer levels x 2 TOU segments.

    Off-peak consumers get the more elastic end of the range, on-peak the
    less elastic end (the assignment is configurable via elasticity_range,
    given as (off_peak, on_peak)).
    """
    if not 1 <= month <= 12:
        raise DomainError(f"month {month} outside 1..12")
    if load_std < 0 or avg_load <= 2.0 * load_std:
        raise DomainError(
            f"need avg_load > 2*load_std >= 0, got avg={avg_load}, std={load_std}")
    eps_off, eps_on = elasticity_range
    if eps_off > 0 or eps_on > 0:
        raise DomainError("elasticities must be <= 0")
    suite = []
    for segment, eps in (("on_peak", eps_on), ("off_peak", eps_off)):
        for level in CONSUMER_LEVELS:
            anchor = avg_load + level * load_std
            suite.append(fit_demand_function(eps, anchor, avg_price, segment, level))
    return tuple(suite)


def average_function(suite: tuple[DemandFunction, ...], segment: str) -> DemandFunction:
    """The level-0 member of a suite for a segment."""
    for f in suite:
        if f.segment == segment and f.consumer_level == 0:
            return f
    raise DomainError(f"suite has no average consumer for segment {segment!r}")


def price_from_load(f: DemandFunction, load: float) -> tuple[float, bool]:
    """Invert the demand function: price at which `load` would be demanded.

    Returns (price, clamped). Prices below zero (load above the intercept)
    are clamped to 0 and flagged.
    """
    if f.slope_b >= 0:
        raise DomainError("perfectly inelastic demand (b = 0) has no inverse")
    price = (load - f.intercept_A) / f.slope_b
    if price < 0.0:
        return 0.0, True
    return price, False


@dataclass(frozen=True)
class DemandConfig:
    """Knobs of the tariff construction.

    base_price: monthly anchor price C0 [$ / kWh], a stand-in for the
    (unpublished) regional residential averages. load_coupling damps how far
    an hour's relative load deviation moves the quantity fed to the inverse
    demand function; with inelastic demand an undamped deviation would swing
    prices far outside the observed range.
    """

    base_price: tuple[float, ...] = (0.12,) * 12
    elasticity_range: tuple[float, float] = (-0.16, -0.08)
    load_coupling: float = 0.10

    def __post_init__(self):
        if len(self.base_price) != 12:
            raise DomainError("base_price needs 12 monthly values")
        if any(p <= 0 for p in self.base_price):
            raise DomainError("base prices must be > 0")
        if not 0.0 <= self.load_coupling <= 1.0:
            raise DomainError("load_coupling outside [0, 1]")


@dataclass(frozen=True)
class TariffSchedule:
    """Hourly buy prices per month plus the grid-sell bonus factor.

    The internal trade price equals the buy price; selling to the main grid
    earns sell_bonus times the buy price.
    """

    buy: tuple[np.ndarray, ...]     # 12 arrays, one per month, $/kWh per hour
    sell_bonus: float = 1.1

    def __post_init__(self):
        if len(self.buy) != 12:
            raise DomainError("tariff needs 12 monthly price arrays")
        arrays = []
        for m, arr in enumerate(self.buy, start=1):
            a = np.asarray(arr, dtype=float)
            if len(a) != MONTH_HOURS[m - 1]:
                raise DomainError(f"month {m} has {len(a)} prices, "
                                  f"expected {MONTH_HOURS[m - 1]}")
            if np.any(a < 0):
                raise DomainError(f"negative price in month {m}")
            a.setflags(write=False)
            arrays.append(a)
        object.__setattr__(self, "buy", tuple(arrays))
        if self.sell_bonus <= 1.0:
            raise DomainError(f"sell_bonus must be > 1, got {self.sell_bonus}")

    def buy_price(self, month: int) -> np.ndarray:
        return self.buy[month - 1]

    def sell_grid_price(self, month: int) -> np.ndarray:
        return self.sell_bonus * self.buy[month - 1]

    def sell_internal_price(self, month: int) -> np.ndarray:
        return self.buy[month - 1]


def build_month_suites(calendar: tuple[MonthCalendar, ...],
                       system_load: np.ndarray,
                       config: DemandConfig) -> tuple[tuple[DemandFunction, ...], ...]:
    """Fit each month's 10-function suite from the year's total system load."""
    suites = []
    pos = 0
    for cal in calendar:
        month_load = system_load[pos:pos + cal.hours]
        pos += cal.hours
        avg = float(month_load.mean())
        std = float(month_load.std())
        if avg <= 0:
            raise DomainError(f"month {cal.month_index} has non-positive average load")
        std = min(std, 0.49 * avg)  # keep the -2 sigma anchor strictly positive
        suites.append(build_demand_suite(cal.month_index, avg, std,
                                         config.base_price[cal.month_index - 1],
                                         config.elasticity_range))
    return tuple(suites)


def build_tariff(calendar: tuple[MonthCalendar, ...],
                 system_load: np.ndarray,
                 suites: tuple[tuple[DemandFunction, ...], ...],
                 config: DemandConfig | None = None,
                 sell_bonus: float = 1.1) -> TariffSchedule:
    """Derive hourly buy prices by inverting each segment's average demand function.

    An hour's relative load deviation r_t (against the month mean) is treated
    as a multiplicative shift of that hour's demand curve; clearing the
    anchor quantity against the shifted curve prices the hour at
    price_from_load(f, PL0 / (1 + load_coupling * r_t)), so heavily loaded
    hours are expensive and light hours cheap, using the function of the
    hour's TOU segment.
    """
    if len(suites) != 12:
        raise DomainError("need a suite for each of the 12 months")
    config = config or DemandConfig()
    monthly = []
    pos = 0
    for cal, suite in zip(calendar, suites):
        month_load = system_load[pos:pos + cal.hours]
        pos += cal.hours
        mean = float(month_load.mean())
        rel = (month_load - mean) / mean if mean > 0 else np.zeros(cal.hours)
        prices = np.empty(cal.hours)
        fns = {seg: average_function(suite, seg) for seg in SEGMENTS}
        for t in range(cal.hours):
            f = fns["on_peak"] if cal.onpeak_mask[t] else fns["off_peak"]
            q = f.anchor_load / (1.0 + config.load_coupling * rel[t])
            prices[t], _ = price_from_load(f, q)
        monthly.append(prices)
    return TariffSchedule(buy=tuple(monthly), sell_bonus=sell_bonus)


def write_tariff_csv(path: str | Path, tariff: TariffSchedule) -> None:
    """Persist buy prices as `month,hour,buy_price` rows."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "hour", "buy_price"])
        for m in range(1, 13):
            for t, p in enumerate(tariff.buy_price(m), start=1):
                writer.writerow([m, t, repr(float(p))])


def read_tariff_csv(path: str | Path, sell_bonus: float = 1.1) -> TariffSchedule:
    """Read a tariff written by write_tariff_csv."""
    path = Path(path)
    per_month: dict[int, list[tuple[int, float]]] = {m: [] for m in range(1, 13)}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["month", "hour", "buy_price"]:
            raise SchemaError(f"{path}: expected header 'month,hour,buy_price'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                m, t, p = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError):
                raise SchemaError(f"{path}:{lineno}: unparseable row {row}") from None
            if not 1 <= m <= 12:
                raise SchemaError(f"{path}:{lineno}: month {m} outside 1..12")
            per_month[m].append((t, p))
    arrays = []
    for m in range(1, 13):
        rows = sorted(per_month[m])
        if [t for t, _ in rows] != list(range(1, MONTH_HOURS[m - 1] + 1)):
            raise SchemaError(f"{path}: month {m} hours not contiguous 1..{MONTH_HOURS[m - 1]}")
        arrays.append(np.array([p for _, p in rows]))
    return TariffSchedule(buy=tuple(arrays), sell_bonus=sell_bonus)
