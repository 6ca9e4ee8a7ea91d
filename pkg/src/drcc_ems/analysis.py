"""Risk-level sweep, resilience under battery scaling, out-of-sample PV
violations and the fuel-cost equivalence table."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import lp
from .core import (ComplexInstance, DomainError, PvSampleSet, Schedule, Tariff,
                   gasoline_equivalent)
from .model import ModeSpec, SolveError, solve_instance
from .wasserstein import AmbiguitySpec

DEFAULT_ALPHAS = (0.01, 0.025, 0.05, 0.1, 0.2)
DEFAULT_C = 1.36


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    cost_deterministic: float
    cost_cc: float
    cost_drcc: float
    status: str = lp.OPTIMAL


@dataclass(frozen=True)
class ResilienceReport:
    battery_scale: float
    ens_residential: float
    ens_residential_common: float
    ens_commercial: float
    resilience_index: float
    grid_independent: bool

    @property
    def ens_total(self) -> float:
        return self.ens_residential + self.ens_residential_common + self.ens_commercial


def ambiguity_for(instance: ComplexInstance, alpha: float, beta: float = 0.05,
                  constant_c: float = DEFAULT_C, norm_kind: str = "inf") -> AmbiguitySpec:
    return AmbiguitySpec(constant_c, beta, alpha, norm_kind, instance.pv_samples.n_samples)


def _cost(instance: ComplexInstance, mode: ModeSpec) -> tuple[float, str]:
    try:
        sched, _, _ = solve_instance(instance, mode)
    except SolveError as exc:
        return math.nan, exc.status
    return sched.total_cost, lp.OPTIMAL


def sensitivity_sweep(instance: ComplexInstance, alphas: Sequence[float] = DEFAULT_ALPHAS,
                      beta: float = 0.05, constant_c: float = DEFAULT_C,
                      norm_kind: str = "inf", workers: int = 1) -> list[SweepRow]:
    """Optimal cost of the three modes for each risk level.

    The deterministic column ignores ``alpha`` and is solved once. A failed
    solve yields NaN costs and a non-optimal ``status`` for that row.
    """
    alphas = list(alphas)
    if not alphas:
        raise DomainError("alpha list is empty")
    if any(not 0 < a < 1 for a in alphas):
        raise DomainError("every alpha must lie in (0, 1)")
    if alphas != sorted(alphas):
        raise DomainError("alphas must be sorted ascending")
    det, det_status = _cost(instance, ModeSpec("deterministic"))

    def row(alpha: float) -> SweepRow:
        amb = ambiguity_for(instance, alpha, beta, constant_c, norm_kind)
        cc, cc_status = _cost(instance, ModeSpec("cc", amb))
        dr, dr_status = _cost(instance, ModeSpec("drcc", amb))
        bad = [s for s in (det_status, cc_status, dr_status) if s != lp.OPTIMAL]
        return SweepRow(alpha, det, cc, dr, bad[0] if bad else lp.OPTIMAL)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(row, alphas))
    return [row(a) for a in alphas]


def resilience_run(instance: ComplexInstance, battery_scale: float) -> ResilienceReport:
    """Full-horizon islanding with load shedding as recourse.

    RI = 100 * (1 - ENS / total demand), ENS summed over the three load
    categories. EV charging is not counted as demand.
    """
    if not 0 < battery_scale <= 1:
        raise DomainError(f"battery_scale must lie in (0, 1], got {battery_scale}")
    scaled = instance.with_battery_scale(battery_scale)
    sched, _, _ = solve_instance(scaled.with_full_outage())
    dt = instance.dt
    ens_r = float(sched.shed_res.sum() * dt) / 1000.0
    ens_rc = float(sched.shed_rescom.sum() * dt) / 1000.0
    ens_c = float(sched.shed_com.sum() * dt) / 1000.0
    demand = float(instance.loads.total.sum() * dt) / 1000.0
    ri = 100.0 if demand <= 0 else 100.0 * (1.0 - (ens_r + ens_rc + ens_c) / demand)
    return ResilienceReport(battery_scale, ens_r, ens_rc, ens_c, min(100.0, max(0.0, ri)),
                            _grid_independent(scaled))


def _grid_independent(instance: ComplexInstance) -> bool:
    """True when the normal-operation deterministic optimum buys nothing."""
    try:
        sched, _, _ = solve_instance(instance)
    except SolveError:
        return False
    return bool(np.all(sched.grid_buy_res + sched.grid_buy_com <= 1e-6))


def resilience_index_from_ens(ens_total_mwh: float, demand_mwh: float) -> float:
    return 100.0 * (1.0 - ens_total_mwh / demand_mwh)


def out_of_sample_eval(schedule: Schedule, holdout: PvSampleSet, tol: float = 1e-9) -> float:
    """Fraction of (sample, period) pairs where dispatched PV exceeds availability."""
    xi = holdout.samples
    if xi.shape[1] != schedule.horizon_length:
        raise DomainError("holdout horizon does not match the schedule")
    return float(np.mean(schedule.pv_total[None, :] > xi + tol))


@dataclass(frozen=True)
class FuelRow:
    source: str
    elec_price: float
    gasoline_equivalent: float
    percent_of_gasoline: float
    monthly_saving: float


def fuel_report(tariff: Tariff, mpg: float = 24.2, mi_per_kwh: float = 4.4,
                gas_price: float = 3.56, miles_per_month: float = 1000.0) -> list[FuelRow]:
    """Gasoline-equivalent price of PV energy and of the top commercial rate."""
    if min(mpg, mi_per_kwh, gas_price) <= 0 or miles_per_month < 0:
        raise DomainError("fuel report inputs must be positive")
    gas_cost = miles_per_month / mpg * gas_price
    rows = []
    for source, price in (("pv_lcoe", tariff.pv_lcoe),
                          ("max_commercial_rate", float(np.max(tariff.commercial_rate)))):
        eq = gasoline_equivalent(price, mpg, mi_per_kwh)
        ev_cost = miles_per_month / mi_per_kwh * price
        rows.append(FuelRow(source, price, eq, 100.0 * eq / gas_price, gas_cost - ev_cost))
    return rows


def write_rows(path, rows: Iterable) -> None:
    """Dataclass rows to CSV, header from field names."""
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to write")
    names = [f.name for f in fields(rows[0])]
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])


@dataclass(frozen=True)
class ViolationRow:
    mode: str
    alpha: float
    violation_rate: float


def violation_table(instance: ComplexInstance, holdout: PvSampleSet, alpha: float,
                    beta: float = 0.05, constant_c: float = DEFAULT_C,
                    norm_kind: str = "inf") -> list[ViolationRow]:
    amb = ambiguity_for(instance, alpha, beta, constant_c, norm_kind)
    out = []
    for mode in ("deterministic", "cc", "drcc"):
        spec = ModeSpec(mode, None if mode == "deterministic" else amb)
        sched, _, _ = solve_instance(instance, spec)
        out.append(ViolationRow(mode, alpha, out_of_sample_eval(sched, holdout)))
    return out
