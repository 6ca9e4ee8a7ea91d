"""Energy management of a multi-building apartment complex with PV, battery
storage and EV fast chargers, under PV uncertainty."""

__version__ = "0.1.0"

from .core import (BatterySpec, ComplexInstance, CostReport, DomainError, EvSession,
                   GridLimits, LoadProfile, PvSampleSet, Schedule, Tariff, TimeGrid,
                   VollPenalties, gasoline_equivalent, soc_update, validate_instance)
from .model import ModeSpec, build_model, extract_schedule, objective_breakdown, solve_instance
from .wasserstein import AmbiguitySpec, dual_norm, estimate_c, radius, wasserstein_1d

__all__ = [
    "AmbiguitySpec", "BatterySpec", "ComplexInstance", "CostReport", "DomainError",
    "EvSession", "GridLimits", "LoadProfile", "ModeSpec", "PvSampleSet", "Schedule",
    "Tariff", "TimeGrid", "VollPenalties", "build_model", "dual_norm", "estimate_c",
    "extract_schedule", "gasoline_equivalent", "objective_breakdown", "radius",
    "soc_update", "solve_instance", "validate_instance", "wasserstein_1d",
]
