"""Hourly input data: month calendar, TOU masks, demand-change factors, profile I/O and synthesis.

All power values are kW on 1-hour steps, so kW and kWh are numerically
interchangeable throughout the package.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SchemaError

HOURS_PER_YEAR = 8760

# Hours per month of the fixed non-leap study year (Jan..Dec).
MONTH_HOURS = (744, 672, 744, 720, 744, 720, 744, 744, 720, 744, 720, 744)

# 2020-vs-2019 average load change per month [%] and the multiplicative
# demand factor derived from it (identity = no pandemic effect).
LOAD_CHANGE_PCT_2020 = (-5.20, 1.00, -5.60, -6.70, -7.60, 0.40,
                        0.20, -0.40, -7.30, -1.80, -4.40, 1.90)
CVD_2020 = (0.948, 1.01, 0.944, 0.933, 0.924, 1.004,
            1.002, 0.996, 0.927, 0.982, 0.956, 1.019)

# On-peak window: weekdays 07:00 (inclusive) to 23:00 (exclusive).
ONPEAK_START_HOUR = 7
ONPEAK_END_HOUR = 23

PROFILE_KINDS = ("load", "pv_max", "wt_max")

_VALID_LENGTHS = frozenset(MONTH_HOURS) | {HOURS_PER_YEAR}


@dataclass(frozen=True)
class MonthCalendar:
    """One month of the study year: hour count, weekday flags and TOU mask."""

    month_index: int                  # 1..12
    hours: int
    weekday_pattern: tuple[bool, ...]  # per day, True = Mon..Fri
    onpeak_mask: np.ndarray            # bool per hour of the month

    def __post_init__(self):
        if not 1 <= self.month_index <= 12:
            raise DomainError(f"month_index {self.month_index} outside 1..12")
        if self.hours != MONTH_HOURS[self.month_index - 1]:
            raise DomainError(
                f"month {self.month_index} must have "
                f"{MONTH_HOURS[self.month_index - 1]} hours, got {self.hours}")
        if len(self.onpeak_mask) != self.hours:
            raise DomainError("onpeak_mask length does not match month hours")
        self.onpeak_mask.setflags(write=False)


def build_year_calendar(start_weekday: int = 0) -> tuple[MonthCalendar, ...]:
    """Build the 12 month calendars of the 8760-hour year.

    start_weekday: weekday of January 1st, 0 = Monday .. 6 = Sunday.
    The study year's weekday alignment is configurable because TOU masks
    depend on it.
    """
    if not 0 <= start_weekday <= 6:
        raise DomainError(f"start_weekday {start_weekday} outside 0..6")
    months = []
    day0 = 0
    for m in range(1, 13):
        n_days = MONTH_HOURS[m - 1] // 24
        weekdays = tuple((start_weekday + day0 + d) % 7 < 5 for d in range(n_days))
        hod = np.tile(np.arange(24), n_days)
        wk = np.repeat(np.asarray(weekdays, dtype=bool), 24)
        mask = wk & (hod >= ONPEAK_START_HOUR) & (hod < ONPEAK_END_HOUR)
        months.append(MonthCalendar(m, MONTH_HOURS[m - 1], weekdays, mask))
        day0 += n_days
    return tuple(months)


@dataclass(frozen=True)
class CovidFactorTable:
    """Monthly multiplicative demand scale factors (12 entries)."""

    cvd: tuple[float, ...]

    def __post_init__(self):
        if len(self.cvd) != 12:
            raise DomainError(f"expected 12 factors, got {len(self.cvd)}")
        for m, f in enumerate(self.cvd, start=1):
            if not 0.9 < f < 1.1:
                raise DomainError(f"factor {f} for month {m} outside (0.9, 1.1)")

    @classmethod
    def pandemic_2020(cls) -> "CovidFactorTable":
        return cls(CVD_2020)

    @classmethod
    def identity(cls) -> "CovidFactorTable":
        return cls((1.0,) * 12)


def covid_factor(table: CovidFactorTable, month: int, enabled: bool = True) -> float:
    """Demand scale factor for a month; 1.0 whenever the effect is disabled."""
    if not 1 <= month <= 12:
        raise DomainError(f"month {month} outside 1..12")
    if not enabled:
        return 1.0
    return table.cvd[month - 1]


@dataclass(frozen=True)
class HourlyProfile:
    """Hourly kW series for one quantity of one SMG (a month or a full year)."""

    kind: str
    smg_id: int
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if self.smg_id < 1:
            raise DomainError(f"smg_id must be >= 1, got {self.smg_id}")
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or len(vals) not in _VALID_LENGTHS:
            raise DomainError(
                f"profile length {vals.shape} is neither a month nor a year")
        if np.any(vals < 0.0):
            t = int(np.argmax(vals < 0.0))
            raise DomainError(f"negative value {vals[t]} at hour {t + 1}")
        vals.setflags(write=False)


def load_profile_csv(path: str | Path, kind: str, smg_id: int) -> HourlyProfile:
    """Read an `hour,value` CSV (1-based contiguous hour index) into a profile."""
    path = Path(path)
    rows: list[tuple[int, float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if [c.strip().lower() for c in header] != ["hour", "value"]:
            raise SchemaError(f"{path}: expected header 'hour,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                hour = int(row[0])
                value = float(row[1])
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: unparseable row {row}") from None
            rows.append((hour, value))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    hours = [h for h, _ in rows]
    expected = list(range(1, len(rows) + 1))
    if hours != expected:
        seen = set()
        for h in hours:
            if h in seen:
                raise SchemaError(f"{path}: duplicate hour {h}")
            seen.add(h)
        missing = sorted(set(expected) - seen)
        raise SchemaError(f"{path}: hour index not contiguous from 1 "
                          f"(first problem near {missing[:3] or hours[:3]})")
    values = np.array([v for _, v in rows], dtype=float)
    if np.any(values < 0.0):
        t = int(np.argmax(values < 0.0))
        raise DomainError(f"{path}: negative value {values[t]} at hour {t + 1}")
    return HourlyProfile(kind=kind, smg_id=smg_id, values=values)


def write_profile_csv(path: str | Path, profile: HourlyProfile) -> None:
    """Write a profile in the `hour,value` schema (round-trips through the loader)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "value"])
        for t, v in enumerate(profile.values, start=1):
            writer.writerow([t, repr(float(v))])


@dataclass(frozen=True)
class SynthesisSpec:
    """Parameters of the deterministic synthetic year.

    The defaults mirror the studied 3-SMG system: PV rated 12/6/3 kW,
    WT rated 10/5/3 kW, PV contributing 40% of annual generated energy,
    and SMG loads in 4:2:1 energy proportion.
    """

    seed: int = 1
    pv_rated: tuple[float, ...] = (12.0, 6.0, 3.0)
    wt_rated: tuple[float, ...] = (10.0, 5.0, 3.0)
    pv_energy_share: float = 0.40
    load_ratios: tuple[float, ...] = (4.0, 2.0, 1.0)
    annual_load_kwh: float = 60000.0
    gen_to_load_ratio: float = 1.25
    start_weekday: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pv_energy_share <= 1.0:
            raise DomainError(f"pv_energy_share {self.pv_energy_share} outside [0,1]")
        n = len(self.load_ratios)
        if len(self.pv_rated) != n or len(self.wt_rated) != n:
            raise DomainError("pv_rated/wt_rated/load_ratios lengths differ")
        if any(r <= 0 for r in self.load_ratios):
            raise DomainError("load_ratios must be positive")
        if any(r < 0 for r in self.pv_rated) or any(r < 0 for r in self.wt_rated):
            raise DomainError("rated powers must be non-negative")
        if self.annual_load_kwh < 0 or self.gen_to_load_ratio <= 0:
            raise DomainError("annual_load_kwh must be >= 0, gen_to_load_ratio > 0")

    @property
    def n_smg(self) -> int:
        return len(self.load_ratios)


def _smooth_noise(rng: np.random.Generator, n: int, rho: float, sigma: float) -> np.ndarray:
    """AR(1) noise path, mean zero."""
    eps = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = rho * acc + eps[i]
        out[i] = acc
    return out


def synthesize_year(spec: SynthesisSpec) -> dict[tuple[str, int], HourlyProfile]:
    """Generate the 9 deterministic hourly profiles (load/pv_max/wt_max per SMG).

    Guarantees: pv_max <= pv_rated and wt_max <= wt_rated everywhere; PV is
    zero outside a fixed contiguous 8-hour daylight window; annual PV energy
    share of total generation equals pv_energy_share (up to rated-power
    saturation); SMG annual load energies follow load_ratios exactly.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_smg
    t = np.arange(HOURS_PER_YEAR)
    day = t // 24
    hod = t % 24
    weekday = (spec.start_weekday + day) % 7 < 5

    # --- load: evening-peaked daily pattern, mild seasonality, smooth noise
    daily = (0.70
             + 0.50 * np.exp(-((hod - 19.0) ** 2) / 10.0)
             + 0.25 * np.exp(-((hod - 8.0) ** 2) / 12.0))
    seasonal = 1.0 + 0.12 * np.cos(2.0 * np.pi * (day - 15) / 365.0)
    daytype = np.where(weekday, 1.02, 0.93)
    loads = []
    for z in range(n):
        noise = 1.0 + np.clip(_smooth_noise(rng, HOURS_PER_YEAR, 0.95, 0.02), -0.10, 0.10)
        loads.append(daily * seasonal * daytype * noise)
    ratio_sum = float(sum(spec.load_ratios))
    for z in range(n):
        target = spec.annual_load_kwh * spec.load_ratios[z] / ratio_sum
        s = float(loads[z].sum())
        loads[z] = loads[z] * (target / s) if s > 0 else loads[z] * 0.0

    # --- PV: half-sine over a fixed 8-hour daylight window, seasonal x daily weather
    window = (hod >= 8) & (hod < 16)
    halfsine = np.where(window, np.sin(np.pi * (hod - 8 + 0.5) / 8.0), 0.0)
    pv_seasonal = 0.825 - 0.175 * np.cos(2.0 * np.pi * (day - 172) / 365.0)
    w = np.empty(365)
    acc = 0.85
    for d_ in range(365):
        acc = 0.75 + 0.80 * (acc - 0.75) + rng.normal(0.0, 0.07)
        acc = min(max(acc, 0.40), 1.0)
        w[d_] = acc
    pv_weather = w[day]
    pv_shape = halfsine * pv_seasonal * pv_weather          # in [0, 1]
    pv_raw = [spec.pv_rated[z] * pv_shape for z in range(n)]

    # --- WT: seasonal base + diurnal swing + smooth noise, clipped to [0, 1]
    wt_base = 0.45 - 0.15 * np.cos(2.0 * np.pi * (day - 46) / 365.0)
    diurnal = 0.10 * np.sin(2.0 * np.pi * (hod - 3) / 24.0)
    wt_raw = []
    for z in range(n):
        v = wt_base + diurnal + _smooth_noise(rng, HOURS_PER_YEAR, 0.97, 0.05)
        wt_raw.append(spec.wt_rated[z] * np.clip(v, 0.0, 1.0))

    # --- scale generation so PV share is exact and rated caps are kept
    pv_e0 = float(sum(p.sum() for p in pv_raw))
    wt_e0 = float(sum(wtp.sum() for wtp in wt_raw))
    share = spec.pv_energy_share
    g_target = spec.gen_to_load_ratio * spec.annual_load_kwh
    cap = g_target
    if share > 0 and pv_e0 > 0:
        cap = min(cap, 0.999 * pv_e0 / share)
    if share < 1 and wt_e0 > 0:
        cap = min(cap, 0.999 * wt_e0 / (1.0 - share))
    k_pv = (share * cap / pv_e0) if pv_e0 > 0 else 0.0
    k_wt = ((1.0 - share) * cap / wt_e0) if wt_e0 > 0 else 0.0

    out: dict[tuple[str, int], HourlyProfile] = {}
    for z in range(n):
        out[("load", z + 1)] = HourlyProfile("load", z + 1, loads[z])
        out[("pv_max", z + 1)] = HourlyProfile("pv_max", z + 1, k_pv * pv_raw[z])
        out[("wt_max", z + 1)] = HourlyProfile("wt_max", z + 1, k_wt * wt_raw[z])
    return out


def month_slice(month: int) -> slice:
    """Hour slice of a month inside an 8760-hour year array."""
    if not 1 <= month <= 12:
        raise DomainError(f"month {month} outside 1..12")
    start = sum(MONTH_HOURS[: month - 1])
    return slice(start, start + MONTH_HOURS[month - 1])
