"""Domain data model for the apartment-complex energy management problem.

All SOC quantities are in kWh, powers in kW, prices in $/kWh. Vectors are
numpy arrays of length ``T`` (the horizon length).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


def _vec(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    horizon_length: int
    step: float = 1.0

    @property
    def periods(self) -> range:
        return range(self.horizon_length)


@dataclass(frozen=True)
class Tariff:
    residential_rate: np.ndarray
    commercial_rate: np.ndarray
    pv_lcoe: float = 0.088

    def __post_init__(self):
        object.__setattr__(self, "residential_rate", _vec(self.residential_rate))
        object.__setattr__(self, "commercial_rate", _vec(self.commercial_rate))


@dataclass(frozen=True)
class LoadProfile:
    residential: np.ndarray
    commercial: np.ndarray
    residential_common: np.ndarray

    def __post_init__(self):
        for name in ("residential", "commercial", "residential_common"):
            object.__setattr__(self, name, _vec(getattr(self, name)))

    @property
    def total(self) -> np.ndarray:
        return self.residential + self.commercial + self.residential_common


@dataclass(frozen=True)
class GridLimits:
    max_exchange: float
    outage_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.outage_mask is not None:
            mask = np.array(self.outage_mask, dtype=bool)
            mask.setflags(write=False)
            object.__setattr__(self, "outage_mask", mask)

    def in_outage(self, t: int) -> bool:
        return self.outage_mask is not None and bool(self.outage_mask[t])


@dataclass(frozen=True)
class BatterySpec:
    """Commercial battery. ``scale`` shrinks power and energy together."""

    power_cap: float
    efficiency: float
    soc_min: float
    soc_max: float
    soc_initial: float
    scale: float = 1.0

    @classmethod
    def from_rating(cls, power_cap: float, efficiency: float = 0.9,
                    duration_h: float = 4.0, soc_min_frac: float = 0.1,
                    soc_max_frac: float = 1.0,
                    soc_initial_frac: Optional[float] = None,
                    scale: float = 1.0) -> "BatterySpec":
        energy = power_cap * duration_h
        if soc_initial_frac is None:
            soc_initial_frac = soc_min_frac
        return cls(power_cap=power_cap, efficiency=efficiency,
                   soc_min=soc_min_frac * energy, soc_max=soc_max_frac * energy,
                   soc_initial=soc_initial_frac * energy, scale=scale)

    @property
    def effective_power_cap(self) -> float:
        return self.power_cap * self.scale

    @property
    def effective_soc_min(self) -> float:
        return self.soc_min * self.scale

    @property
    def effective_soc_max(self) -> float:
        return self.soc_max * self.scale

    @property
    def effective_soc_initial(self) -> float:
        return self.soc_initial * self.scale

    def scaled(self, scale: float) -> "BatterySpec":
        return replace(self, scale=scale)


@dataclass(frozen=True)
class EvSession:
    """One EV plugged into a fast charger.

    SOC values are fractions of ``capacity``. The SOC is pinned at the end of
    ``arrival_period`` and at the end of ``departure_period``; charging
    happens in the periods strictly after arrival up to and including
    departure.
    """

    capacity: float
    charger_power: float
    efficiency: float
    arrival_period: int
    departure_period: int
    soc_arrival: float
    soc_departure: float
    soc_min: float = 0.1
    soc_max: float = 1.0
    name: str = ""

    @property
    def charging_periods(self) -> range:
        return range(self.arrival_period + 1, self.departure_period + 1)

    @property
    def required_energy(self) -> float:
        return (self.soc_departure - self.soc_arrival) * self.capacity

    def max_deliverable(self, dt: float) -> float:
        # Stored energy per period is capped by charger_power (P_ch * eta <= cap).
        return self.charger_power * dt * len(self.charging_periods)


@dataclass(frozen=True)
class VollPenalties:
    residential: float = 10.0
    commercial: float = 6.0
    residential_common: float = 8.0


@dataclass(frozen=True)
class PvSampleSet:
    """N sampled PV availability trajectories (kW), shape ``(N, T)``."""

    samples: np.ndarray
    nominal: Optional[np.ndarray] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[None, :]
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        nominal = samples.mean(axis=0) if self.nominal is None else self.nominal
        object.__setattr__(self, "nominal", _vec(nominal))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def horizon_length(self) -> int:
        return self.samples.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


@dataclass(frozen=True)
class ComplexInstance:
    time_grid: TimeGrid
    tariff: Tariff
    loads: LoadProfile
    grid_limits: GridLimits
    battery: BatterySpec
    ev_sessions: tuple[EvSession, ...]
    penalties: VollPenalties
    pv_samples: PvSampleSet
    shedding_enabled: bool = False
    ev_discharge_enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ev_sessions", tuple(self.ev_sessions))

    @property
    def T(self) -> int:
        return self.time_grid.horizon_length

    @property
    def dt(self) -> float:
        return self.time_grid.step

    def with_battery_scale(self, scale: float) -> "ComplexInstance":
        return replace(self, battery=self.battery.scaled(scale))

    def with_full_outage(self) -> "ComplexInstance":
        limits = GridLimits(self.grid_limits.max_exchange, np.ones(self.T, dtype=bool))
        return replace(self, grid_limits=limits, shedding_enabled=True)


@dataclass(frozen=True)
class CostReport:
    """The six per-horizon cost terms, in objective order."""

    commercial: float = 0.0
    residential: float = 0.0
    pv: float = 0.0
    shed_residential: float = 0.0
    shed_commercial: float = 0.0
    shed_residential_common: float = 0.0

    TERMS = ("commercial", "residential", "pv", "shed_residential",
             "shed_commercial", "shed_residential_common")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.TERMS)

    @property
    def total(self) -> float:
        return float(sum(self.as_tuple()))


@dataclass
class Schedule:
    """Per-period dispatch. EV arrays have shape ``(n_ev, T)``; ``ev_soc`` is
    NaN outside each session's plug-in window."""

    grid_buy_res: np.ndarray
    grid_buy_com: np.ndarray
    grid_sell_com: np.ndarray
    pv_total: np.ndarray
    pv_res: np.ndarray
    pv_com: np.ndarray
    pv_curtailed: np.ndarray
    bes_charge_res: np.ndarray
    bes_charge_com: np.ndarray
    bes_discharge_res: np.ndarray
    bes_discharge_com: np.ndarray
    bes_soc: np.ndarray
    ev_charge: np.ndarray
    ev_discharge: np.ndarray
    ev_soc: np.ndarray
    shed_res: np.ndarray
    shed_com: np.ndarray
    shed_rescom: np.ndarray
    pv_capacity: Optional[np.ndarray] = None
    cost_terms: Optional[CostReport] = None
    total_cost: Optional[float] = None

    PERIOD_FIELDS = (
        "grid_buy_res", "grid_buy_com", "grid_sell_com", "pv_total", "pv_res",
        "pv_com", "pv_curtailed", "bes_charge_res", "bes_charge_com",
        "bes_discharge_res", "bes_discharge_com", "bes_soc",
        "shed_res", "shed_com", "shed_rescom",
    )

    @property
    def horizon_length(self) -> int:
        return len(self.grid_buy_res)

    @property
    def bes_charge(self) -> np.ndarray:
        return self.bes_charge_res + self.bes_charge_com

    @property
    def bes_discharge(self) -> np.ndarray:
        return self.bes_discharge_res + self.bes_discharge_com

    @classmethod
    def zeros(cls, T: int, n_ev: int = 0) -> "Schedule":
        kw = {name: np.zeros(T) for name in cls.PERIOD_FIELDS}
        return cls(ev_charge=np.zeros((n_ev, T)), ev_discharge=np.zeros((n_ev, T)),
                   ev_soc=np.full((n_ev, T), np.nan), **kw)

    def balance_residuals(self, loads: LoadProfile) -> tuple[np.ndarray, np.ndarray]:
        """Residential and commercial power-balance residuals per period (kW).

        EV discharge counts as commercial supply; it is zero unless the
        instance enables V2G.
        """
        res = (self.grid_buy_res - loads.residential + self.pv_res
               - self.bes_charge_res + self.bes_discharge_res + self.shed_res)
        com = (self.grid_buy_com - self.grid_sell_com - loads.commercial
               - loads.residential_common + self.pv_com - self.bes_charge_com
               + self.bes_discharge_com + self.shed_com + self.shed_rescom
               - self.ev_charge.sum(axis=0) + self.ev_discharge.sum(axis=0))
        return res, com


def soc_update(soc_prev: float, charge: float, discharge: float,
               efficiency: float, dt: float) -> float:
    """Next state of charge: ``soc_prev + (charge*eff - discharge/eff)*dt``."""
    if not 0.0 < efficiency <= 1.0:
        raise DomainError(f"efficiency must lie in (0, 1], got {efficiency}")
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if charge < 0 or discharge < 0:
        raise DomainError("charge and discharge must be non-negative")
    return soc_prev + (charge * efficiency - discharge / efficiency) * dt


def gasoline_equivalent(elec_price: float, vehicle_mpg: float,
                        ev_efficiency: float) -> float:
    """Price per gallon of gasoline that buys the same range as one kWh at
    ``elec_price`` for an EV doing ``ev_efficiency`` miles/kWh."""
    if ev_efficiency <= 0 or vehicle_mpg <= 0:
        raise DomainError("vehicle_mpg and ev_efficiency must be positive")
    if elec_price < 0:
        raise DomainError("elec_price must be non-negative")
    return elec_price * vehicle_mpg / ev_efficiency


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_instance(instance: ComplexInstance) -> ValidationReport:
    """Check every invariant of ``instance``; never raises."""
    report = ValidationReport()
    bad = report.violations.append
    T = instance.time_grid.horizon_length
    if T < 1:
        bad(f"time_grid.horizon_length: must be >= 1, got {T}")
    if not instance.time_grid.step > 0:
        bad(f"time_grid.step: must be > 0, got {instance.time_grid.step}")

    def check_vec(name, vec, nonneg=True):
        if len(vec) != T:
            bad(f"{name}: length mismatch, expected {T}, got {len(vec)}")
        if not np.all(np.isfinite(vec)):
            bad(f"{name}: non-finite entries")
        elif nonneg and np.any(vec < 0):
            rows = np.flatnonzero(vec < 0).tolist()
            bad(f"{name}: negative entries at periods {rows}")

    check_vec("tariff.residential_rate", instance.tariff.residential_rate)
    check_vec("tariff.commercial_rate", instance.tariff.commercial_rate)
    if instance.tariff.pv_lcoe < 0:
        bad("tariff.pv_lcoe: must be >= 0")
    check_vec("loads.residential", instance.loads.residential)
    check_vec("loads.commercial", instance.loads.commercial)
    check_vec("loads.residential_common", instance.loads.residential_common)

    grid = instance.grid_limits
    if grid.max_exchange < 0:
        bad("grid_limits.max_exchange: must be >= 0")
    if grid.outage_mask is not None and len(grid.outage_mask) != T:
        bad(f"grid_limits.outage_mask: length mismatch, expected {T}, "
            f"got {len(grid.outage_mask)}")

    bat = instance.battery
    if not 0 < bat.efficiency <= 1:
        bad(f"battery.efficiency: must lie in (0, 1], got {bat.efficiency}")
    if bat.power_cap < 0:
        bad("battery.power_cap: must be >= 0")
    if not bat.scale >= 0:
        bad("battery.scale: must be >= 0")
    if not 0 <= bat.soc_min <= bat.soc_initial <= bat.soc_max:
        bad(f"battery.soc: need 0 <= soc_min <= soc_initial <= soc_max, got "
            f"{bat.soc_min}, {bat.soc_initial}, {bat.soc_max}")

    for i, ev in enumerate(instance.ev_sessions):
        label = f"ev_sessions[{i}]" + (f" ({ev.name})" if ev.name else "")
        if not 0 <= ev.arrival_period < ev.departure_period < T:
            bad(f"{label}: need 0 <= arrival < departure < T, got "
                f"{ev.arrival_period}, {ev.departure_period}")
        if not 0 < ev.efficiency <= 1:
            bad(f"{label}: efficiency must lie in (0, 1]")
        if ev.capacity <= 0 or ev.charger_power < 0:
            bad(f"{label}: capacity must be > 0 and charger_power >= 0")
        if not (ev.soc_min <= ev.soc_arrival <= ev.soc_max
                and ev.soc_min <= ev.soc_departure <= ev.soc_max):
            bad(f"{label}: SOC bounds inverted (min {ev.soc_min}, arrival "
                f"{ev.soc_arrival}, departure {ev.soc_departure}, max {ev.soc_max})")
        if ev.required_energy > ev.max_deliverable(instance.dt) + 1e-9:
            bad(f"{label}: departure SOC unreachable, needs {ev.required_energy:.3f} kWh "
                f"but charger delivers at most {ev.max_deliverable(instance.dt):.3f} kWh")

    pen = instance.penalties
    if min(pen.residential, pen.commercial, pen.residential_common) < 0:
        bad("penalties: VOLL values must be >= 0")

    pv = instance.pv_samples
    if pv.n_samples < 1:
        bad("pv_samples: need at least one sample")
    if pv.horizon_length != T:
        bad(f"pv_samples: length mismatch, expected {T}, got {pv.horizon_length}")
    elif not np.all(np.isfinite(pv.samples)) or np.any(pv.samples < 0):
        bad("pv_samples: entries must be finite and >= 0")
    if len(pv.nominal) != T:
        bad(f"pv_samples.nominal: length mismatch, expected {T}, got {len(pv.nominal)}")
    return report
