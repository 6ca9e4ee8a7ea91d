"""Instance loading, synthetic instance generation and CSV I/O.

Tabular files are CSV with a header row and a leading ``period`` column
(0..T-1, in order). The instance config is an INI file; see the README for
the full key list.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (BatterySpec, ComplexInstance, EvSession, GridLimits, LoadProfile,
                   PvSampleSet, Schedule, Tariff, TimeGrid, VollPenalties,
                   validate_instance)


class IngestError(ValueError):
    pass


PV_PEAK_KW = 1540.0
SUNRISE, SUNSET = 6, 20
PV_SIGMA = 0.25
PV_CLIP = 0.25
PV_DAY_CORRELATION = 0.7

# reference sessions: arrival h, departure h, SOC arrival, SOC departure
REFERENCE_EVS = (
    ("EV1", 5, 12, 0.20, 0.95),
    ("EV2", 9, 15, 0.20, 1.00),
    ("EV3", 15, 21, 0.20, 0.90),
    ("EV4", 6, 11, 0.40, 0.80),
    ("EV5", 18, 23, 0.30, 0.90),
)

LOAD_COLUMNS = ("residential_kw", "commercial_kw", "residential_common_kw")
TARIFF_COLUMNS = ("residential_rate", "commercial_rate")


def reference_ev_sessions(capacity: float = 75.0, charger_power: float = 11.0,
                      efficiency: float = 0.9) -> tuple[EvSession, ...]:
    return tuple(
        EvSession(capacity=capacity, charger_power=charger_power, efficiency=efficiency,
                  arrival_period=arr, departure_period=dep, soc_arrival=s_arr,
                  soc_departure=s_dep, soc_min=0.1, soc_max=1.0, name=name)
        for name, arr, dep, s_arr, s_dep in REFERENCE_EVS)


# ---------------------------------------------------------------------------
# synthetic data


def pv_shape(T: int = 24) -> np.ndarray:
    """Clear-sky bell on [SUNRISE, SUNSET], 1.0 at solar noon."""
    t = np.arange(T, dtype=float)
    phase = np.clip((t - SUNRISE) / (SUNSET - SUNRISE), 0.0, 1.0)
    return np.sin(np.pi * phase) ** 1.5


def synth_pv_samples(rng: np.random.Generator, n_samples: int, T: int = 24,
                     sigma: float = PV_SIGMA, clip: float = PV_CLIP) -> np.ndarray:
    """Log-normal perturbations of the clear-sky bell.

    Each trajectory gets a day factor shared by all periods (correlation
    ``PV_DAY_CORRELATION``) plus an hourly factor; the mean-one multiplier is
    clipped to ``[0, 1 + clip]`` so no sample exceeds ``PV_PEAK_KW*(1+clip)``.
    """
    rho = PV_DAY_CORRELATION
    day = rng.standard_normal((n_samples, 1))
    hour = rng.standard_normal((n_samples, T))
    z = rho * day + math.sqrt(1 - rho * rho) * hour
    mult = np.minimum(np.exp(sigma * z - sigma * sigma / 2), 1.0 + clip)
    return PV_PEAK_KW * pv_shape(T)[None, :] * mult


def _bump(t, center, width):
    return np.exp(-((t - center) ** 2) / (2 * width ** 2))


def synth_loads(rng: np.random.Generator, T: int = 24, noise: float = 0.03) -> LoadProfile:
    """Evening-peaking residential demand, night-lit common areas, daytime
    clubhouse/gym/pool commercial load (kW)."""
    t = np.arange(T, dtype=float)
    residential = 150 + 90 * _bump(t, 8, 1.5) + 230 * _bump(t, 20, 2.5)
    common = 35 + 40 * ((t < 7) | (t >= 19))
    commercial = 12 + 38 * ((t >= 8) & (t <= 21))
    jitter = lambda v: np.maximum(0.0, v * (1 + noise * rng.standard_normal(T)))
    return LoadProfile(jitter(residential), jitter(commercial), jitter(common))


def synth_tariff(T: int = 24, pv_lcoe: float = 0.088) -> Tariff:
    """Two-tier synthetic TOU rates, on-peak 12:00-21:00."""
    on_peak = (np.arange(T) >= 12) & (np.arange(T) < 21)
    return Tariff(np.where(on_peak, 0.18, 0.12), np.where(on_peak, 0.21, 0.10), pv_lcoe)


def synth_instance(seed: int = 42, n_samples: int = 365, T: int = 24) -> ComplexInstance:
    """Synthetic subtropical complex; deterministic in ``seed``."""
    if n_samples < 1:
        raise IngestError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    pv = synth_pv_samples(rng, n_samples, T)
    loads = synth_loads(rng, T)
    return ComplexInstance(
        time_grid=TimeGrid(T, 1.0),
        tariff=synth_tariff(T),
        loads=loads,
        grid_limits=GridLimits(2000.0),
        battery=BatterySpec.from_rating(800.0, efficiency=0.9, duration_h=4.0),
        ev_sessions=reference_ev_sessions(),
        penalties=VollPenalties(),
        pv_samples=PvSampleSet(pv),
    )


# ---------------------------------------------------------------------------
# CSV


def read_table(path, columns: Optional[Sequence[str]] = None, prefix: Optional[str] = None,
               nonneg: bool = True, allow_nan: bool = False) -> tuple[list[str], np.ndarray]:
    """Read a period-indexed CSV into ``(column names, array of shape (T, k))``.

    Exactly ``columns`` are required when given; with ``prefix`` every column
    after ``period`` must start with it. ``allow_nan`` admits empty markers
    (NaN) but still rejects infinities.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"{path}: cannot read ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}:1: empty file") from None
        if not header or header[0] != "period":
            raise IngestError(f"{path}:1: first column must be 'period'")
        names = header[1:]
        if columns is not None and tuple(names) != tuple(columns):
            raise IngestError(f"{path}:1: expected columns {list(columns)}, got {names}")
        if prefix is not None and (not names or not all(n.startswith(prefix) for n in names)):
            raise IngestError(f"{path}:1: expected columns named {prefix}*")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                period = int(rec[0])
                vals = [float(f) for f in rec[1:]]
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
            if period != len(rows):
                raise IngestError(f"{path}:{lineno}: period {period} out of order, "
                                  f"expected {len(rows)}")
            for name, v in zip(names, vals):
                if math.isnan(v) and allow_nan:
                    continue
                if not math.isfinite(v):
                    raise IngestError(f"{path}:{lineno}: non-finite value in {name}")
                if nonneg and v < 0:
                    raise IngestError(f"{path}:{lineno}: negative value {v} in {name} "
                                      f"(period {period})")
            rows.append(vals)
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return names, np.array(rows, dtype=float)


def write_table(path, columns: Sequence[str], data: np.ndarray) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", *columns])
        for t, row in enumerate(data):
            w.writerow([t, *(repr(float(v)) for v in row)])


def write_schedule_csv(schedule: Schedule, path) -> None:
    """One row per period; column order is :func:`schedule_columns`."""
    n_ev = schedule.ev_charge.shape[0]
    cols = schedule_columns(n_ev)
    T = schedule.horizon_length
    if T < 1:
        raise IngestError("cannot write an empty schedule")
    data = np.empty((T, len(cols)))
    k = 0
    for name in Schedule.PERIOD_FIELDS:
        data[:, k] = getattr(schedule, name)
        k += 1
    for i in range(n_ev):
        data[:, k] = schedule.ev_charge[i]
        data[:, k + 1] = schedule.ev_discharge[i]
        data[:, k + 2] = schedule.ev_soc[i]
        k += 3
    data[:, k] = schedule.pv_capacity if schedule.pv_capacity is not None else np.nan
    write_table(path, cols, data)


def schedule_columns(n_ev: int) -> list[str]:
    cols = list(Schedule.PERIOD_FIELDS)
    for i in range(n_ev):
        cols += [f"ev_charge_{i}", f"ev_discharge_{i}", f"ev_soc_{i}"]
    return cols + ["pv_capacity"]


def read_schedule_csv(path) -> Schedule:
    path = Path(path)
    names, data = read_table(path, nonneg=False, allow_nan=True)
    n_fixed = len(Schedule.PERIOD_FIELDS)
    n_ev = (len(names) - n_fixed - 1) // 3
    if names != schedule_columns(n_ev):
        raise IngestError(f"{path}:1: unexpected schedule columns")
    kw = {name: data[:, k].copy() for k, name in enumerate(Schedule.PERIOD_FIELDS)}
    ev = data[:, n_fixed:n_fixed + 3 * n_ev].T.reshape(n_ev, 3, -1)
    return Schedule(ev_charge=ev[:, 0].copy(), ev_discharge=ev[:, 1].copy(),
                    ev_soc=ev[:, 2].copy(), pv_capacity=data[:, -1].copy(), **kw)


# ---------------------------------------------------------------------------
# config


def _parse_periods(text: str) -> list[int]:
    """``"0-5, 12"`` -> ``[0, 1, 2, 3, 4, 5, 12]``."""
    out: list[int] = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(p) for p in part.split("-", 1))
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return out


@dataclass
class InstanceConfig:
    """Everything needed to build a :class:`ComplexInstance`."""

    loads_path: Optional[Path] = None
    pv_path: Optional[Path] = None
    tariff_path: Optional[Path] = None
    synthetic_seed: Optional[int] = None
    synthetic_samples: int = 365
    time_step: float = 1.0
    pv_lcoe: float = 0.088
    max_exchange: float = 2000.0
    outage_periods: list[int] = field(default_factory=list)
    battery: dict = field(default_factory=dict)
    penalties: dict = field(default_factory=dict)
    ev_sessions: Optional[list[EvSession]] = None
    shedding_enabled: bool = False
    ev_discharge_enabled: bool = False
    ambiguity: dict = field(default_factory=dict)
    source: Optional[Path] = None

    @classmethod
    def from_file(cls, path) -> "InstanceConfig":
        path = Path(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise IngestError(f"{path}: cannot read ({exc.strerror})") from exc
        except configparser.Error as exc:
            raise IngestError(f"{path}: {exc}") from exc
        try:
            return cls._from_parser(parser, path)
        except (ValueError, KeyError) as exc:
            if isinstance(exc, IngestError):
                raise
            raise IngestError(f"{path}: {exc}") from exc

    @classmethod
    def _from_parser(cls, p: configparser.ConfigParser, path: Path) -> "InstanceConfig":
        base = path.parent
        cfg = cls(source=path)
        if p.has_section("data"):
            d = p["data"]
            for key, attr in (("loads", "loads_path"), ("pv_samples", "pv_path"),
                              ("tariff", "tariff_path")):
                if key in d:
                    setattr(cfg, attr, base / d[key])
            if "synthetic_seed" in d:
                cfg.synthetic_seed = d.getint("synthetic_seed")
            cfg.synthetic_samples = d.getint("synthetic_samples", cfg.synthetic_samples)
        cfg.time_step = p.getfloat("time", "step", fallback=cfg.time_step)
        cfg.pv_lcoe = p.getfloat("tariff", "pv_lcoe", fallback=cfg.pv_lcoe)
        cfg.max_exchange = p.getfloat("grid", "max_exchange", fallback=cfg.max_exchange)
        cfg.outage_periods = _parse_periods(p.get("grid", "outage", fallback=""))
        if p.has_section("battery"):
            cfg.battery = {k: float(v) for k, v in p["battery"].items()}
        if p.has_section("penalties"):
            cfg.penalties = {k: float(v) for k, v in p["penalties"].items()}
        if p.has_section("ambiguity"):
            cfg.ambiguity = dict(p["ambiguity"].items())
        cfg.shedding_enabled = p.getboolean("options", "shedding_enabled", fallback=False)
        cfg.ev_discharge_enabled = p.getboolean("options", "ev_discharge_enabled",
                                                fallback=False)
        ev_sections = [s for s in p.sections() if s.startswith("ev:")]
        if ev_sections:
            cfg.ev_sessions = []
            for s in ev_sections:
                e = p[s]
                cfg.ev_sessions.append(EvSession(
                    capacity=e.getfloat("capacity", 75.0),
                    charger_power=e.getfloat("charger_power", 11.0),
                    efficiency=e.getfloat("efficiency", 0.9),
                    arrival_period=e.getint("arrival"),
                    departure_period=e.getint("departure"),
                    soc_arrival=e.getfloat("soc_arrival"),
                    soc_departure=e.getfloat("soc_departure"),
                    soc_min=e.getfloat("soc_min", 0.1),
                    soc_max=e.getfloat("soc_max", 1.0),
                    name=s[3:]))
        elif p.getboolean("options", "no_evs", fallback=False):
            cfg.ev_sessions = []
        return cfg


_BATTERY_KWH_KEYS = ("soc_min", "soc_max", "soc_initial")


def _battery_from(params: dict) -> BatterySpec:
    params = dict(params)
    power = params.pop("power_cap", 800.0)
    if any(k in params for k in _BATTERY_KWH_KEYS):
        soc_min = params.get("soc_min", 0.0)
        return BatterySpec(power_cap=power, efficiency=params.get("efficiency", 0.9),
                           soc_min=soc_min, soc_max=params.get("soc_max", power * 4.0),
                           soc_initial=params.get("soc_initial", soc_min),
                           scale=params.get("scale", 1.0))
    allowed = {"efficiency", "duration_h", "soc_min_frac", "soc_max_frac",
               "soc_initial_frac", "scale"}
    unknown = set(params) - allowed
    if unknown:
        raise IngestError(f"unknown battery keys: {sorted(unknown)}")
    return BatterySpec.from_rating(power, **params)


def load_instance(config) -> ComplexInstance:
    """Build and validate an instance from an :class:`InstanceConfig` or a
    config file path. Raises :class:`IngestError` on any problem."""
    cfg = config if isinstance(config, InstanceConfig) else InstanceConfig.from_file(config)
    if cfg.synthetic_seed is not None:
        synth = synth_instance(cfg.synthetic_seed, cfg.synthetic_samples)
        loads, pv, tariff_rates = synth.loads, synth.pv_samples.samples, (
            synth.tariff.residential_rate, synth.tariff.commercial_rate)
    else:
        missing = [k for k, v in (("loads", cfg.loads_path), ("pv_samples", cfg.pv_path),
                                  ("tariff", cfg.tariff_path)) if v is None]
        if missing:
            raise IngestError(f"{cfg.source}: [data] is missing {missing}")
        _, ld = read_table(cfg.loads_path, LOAD_COLUMNS)
        loads = LoadProfile(ld[:, 0], ld[:, 1], ld[:, 2])
        _, pv_cols = read_table(cfg.pv_path, prefix="sample_")
        pv = pv_cols.T
        _, tr = read_table(cfg.tariff_path, TARIFF_COLUMNS)
        tariff_rates = (tr[:, 0], tr[:, 1])
    T = len(loads.residential)
    if pv.shape[1] != T:
        raise IngestError(f"{cfg.pv_path}: PV samples cover {pv.shape[1]} periods, "
                          f"loads cover {T}")
    if len(tariff_rates[0]) != T:
        raise IngestError(f"{cfg.tariff_path}: tariff covers {len(tariff_rates[0])} "
                          f"periods, loads cover {T}")
    outage = None
    if cfg.outage_periods:
        bad = [p for p in cfg.outage_periods if not 0 <= p < T]
        if bad:
            raise IngestError(f"{cfg.source}: outage periods out of range: {bad}")
        outage = np.zeros(T, dtype=bool)
        outage[cfg.outage_periods] = True
    instance = ComplexInstance(
        time_grid=TimeGrid(T, cfg.time_step),
        tariff=Tariff(tariff_rates[0], tariff_rates[1], cfg.pv_lcoe),
        loads=loads,
        grid_limits=GridLimits(cfg.max_exchange, outage),
        battery=_battery_from(cfg.battery),
        ev_sessions=tuple(reference_ev_sessions() if cfg.ev_sessions is None else cfg.ev_sessions),
        penalties=VollPenalties(**cfg.penalties),
        pv_samples=PvSampleSet(pv),
        shedding_enabled=cfg.shedding_enabled,
        ev_discharge_enabled=cfg.ev_discharge_enabled,
    )
    report = validate_instance(instance)
    if not report.ok:
        raise IngestError(f"{cfg.source}: validation failed: " + "; ".join(report.violations))
    return instance


def write_instance(instance: ComplexInstance, directory, name: str = "instance.ini") -> Path:
    """Write ``instance`` as a config plus CSVs that :func:`load_instance` reads back."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ld = instance.loads
    write_table(directory / "loads.csv", LOAD_COLUMNS,
                np.column_stack([ld.residential, ld.commercial, ld.residential_common]))
    pv = instance.pv_samples.samples
    write_table(directory / "pv_samples.csv", [f"sample_{k}" for k in range(pv.shape[0])], pv.T)
    write_table(directory / "tariff.csv", TARIFF_COLUMNS,
                np.column_stack([instance.tariff.residential_rate,
                                 instance.tariff.commercial_rate]))
    p = configparser.ConfigParser()
    p["data"] = {"loads": "loads.csv", "pv_samples": "pv_samples.csv", "tariff": "tariff.csv"}
    p["time"] = {"step": repr(instance.dt)}
    p["tariff"] = {"pv_lcoe": repr(instance.tariff.pv_lcoe)}
    grid = {"max_exchange": repr(instance.grid_limits.max_exchange)}
    if instance.grid_limits.outage_mask is not None:
        grid["outage"] = ", ".join(str(t) for t in np.flatnonzero(instance.grid_limits.outage_mask))
    p["grid"] = grid
    b = instance.battery
    p["battery"] = {k: repr(float(getattr(b, k))) for k in
                    ("power_cap", "efficiency", "soc_min", "soc_max", "soc_initial", "scale")}
    pen = instance.penalties
    p["penalties"] = {k: repr(float(getattr(pen, k))) for k in
                      ("residential", "commercial", "residential_common")}
    p["options"] = {"shedding_enabled": str(instance.shedding_enabled).lower(),
                    "ev_discharge_enabled": str(instance.ev_discharge_enabled).lower(),
                    "no_evs": str(not instance.ev_sessions).lower()}
    for i, ev in enumerate(instance.ev_sessions):
        p[f"ev:{ev.name or f'EV{i + 1}'}"] = {
            "capacity": repr(ev.capacity), "charger_power": repr(ev.charger_power),
            "efficiency": repr(ev.efficiency), "arrival": str(ev.arrival_period),
            "departure": str(ev.departure_period), "soc_arrival": repr(ev.soc_arrival),
            "soc_departure": repr(ev.soc_departure), "soc_min": repr(ev.soc_min),
            "soc_max": repr(ev.soc_max)}
    out = directory / name
    tmp = out.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        p.write(fh)
    os.replace(tmp, out)
    return out
