"""Static system parameters and scenario selection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import DomainError

ARCHITECTURES = ("mmg", "smg")
TERMINAL_SOC_RULES = ("free", "return_to_initial")
EDR_MODES = ("hard", "report_only")

# Line capacity matrix of the studied 3-SMG system [kW]: diagonal entries are
# the SMG-to-main-grid lines, off-diagonal the internal lines (symmetric).
DEFAULT_LINE_MAX = ((16.0, 8.0, 4.0),
                    (8.0, 4.0, 2.0),
                    (4.0, 2.0, 2.0))


@dataclass(frozen=True)
class SystemSpec:
    """All static optimization parameters (defaults: the studied 3-SMG system)."""

    n_smg: int = 3
    line_max: tuple[tuple[float, ...], ...] = DEFAULT_LINE_MAX
    bat_max: tuple[float, ...] = (2.0, 1.0, 0.5)       # kW, discharge limit
    bat_min: tuple[float, ...] = (-2.0, -1.0, -0.5)    # kW, charge limit
    soc_min: float = 0.2
    soc_max: float = 1.0
    base_power: tuple[float, ...] = (4.0, 2.0, 1.0)    # kW, battery base S_z
    target: tuple[float, ...] = (150.0, 250.0, 650.0)  # $ per SMG per month
    edr_cap: float = 500.0                             # $ per SMG per month
    target_total: float = 1050.0                       # $, reporting only
    big_m: float | None = None                         # None: derived from data
    months: int = 12

    def __post_init__(self):
        n = self.n_smg
        if n < 1:
            raise DomainError(f"n_smg must be >= 1, got {n}")
        per_smg = {"bat_max": self.bat_max, "bat_min": self.bat_min,
                   "base_power": self.base_power, "target": self.target}
        for name, vals in per_smg.items():
            if len(vals) != n:
                raise DomainError(f"{name} must have {n} entries, got {len(vals)}")
        if len(self.line_max) != n or any(len(row) != n for row in self.line_max):
            raise DomainError(f"line_max must be a {n}x{n} matrix")
        for z in range(n):
            for y in range(n):
                if self.line_max[z][y] < 0:
                    raise DomainError(f"line_max[{z + 1}][{y + 1}] negative")
                if y != z and self.line_max[z][y] != self.line_max[y][z]:
                    raise DomainError(
                        f"internal line_max[{z + 1}][{y + 1}] not symmetric")
        for z in range(n):
            if self.bat_min[z] != -self.bat_max[z]:
                raise DomainError(f"bat_min[{z + 1}] must equal -bat_max[{z + 1}]")
            if self.bat_max[z] < 0:
                raise DomainError(f"bat_max[{z + 1}] negative")
            if self.base_power[z] <= 0:
                raise DomainError(f"base_power[{z + 1}] must be > 0")
        if not self.soc_min < self.soc_max:
            raise DomainError("need soc_min < soc_max")
        if self.edr_cap < 0:
            raise DomainError("edr_cap must be >= 0")
        if self.big_m is not None and self.big_m <= 0:
            raise DomainError("big_m must be > 0 when given")

    def grid_line(self, z: int) -> float:
        """Main-grid line capacity of SMG z (1-based)."""
        return self.line_max[z - 1][z - 1]

    def internal_line(self, z: int, y: int) -> float:
        """Internal line capacity between SMGs z and y (1-based, z != y)."""
        if z == y:
            raise DomainError("internal_line needs two distinct SMGs")
        return self.line_max[z - 1][y - 1]

    def with_overrides(self, **kwargs) -> "SystemSpec":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ScenarioConfig:
    """Architecture / pandemic-effect switch for one scenario run."""

    architecture: str = "mmg"
    covid: bool = True
    terminal_soc_rule: str = "free"
    edr_mode: str = "hard"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise DomainError(f"architecture must be one of {ARCHITECTURES}")
        if self.terminal_soc_rule not in TERMINAL_SOC_RULES:
            raise DomainError(f"terminal_soc_rule must be one of {TERMINAL_SOC_RULES}")
        if self.edr_mode not in EDR_MODES:
            raise DomainError(f"edr_mode must be one of {EDR_MODES}")

    @property
    def scenario_id(self) -> int:
        """Study numbering: 1=MMG+covid, 2=MMG, 3=SMG+covid, 4=SMG."""
        base = 1 if self.architecture == "mmg" else 3
        return base if self.covid else base + 1


def scenario_from_id(scenario_id: int, terminal_soc_rule: str = "free",
                     edr_mode: str = "hard") -> ScenarioConfig:
    if not 1 <= scenario_id <= 4:
        raise DomainError(f"scenario id {scenario_id} outside 1..4")
    return ScenarioConfig(architecture="mmg" if scenario_id <= 2 else "smg",
                          covid=scenario_id in (1, 3),
                          terminal_soc_rule=terminal_soc_rule,
                          edr_mode=edr_mode)
