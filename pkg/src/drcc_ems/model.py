"""LP assembly for the deterministic, chance-constrained and DRCC modes.

Variable names follow ``<symbol>[t]`` (``ev_*[i][t]`` for EV sessions). Row
and variable tags name the constraint group each entry comes from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import lp
from .core import (ComplexInstance, CostReport, DomainError, Schedule, Tariff,
                   VollPenalties, validate_instance)
from .wasserstein import AmbiguitySpec, dual_norm

MODES = ("deterministic", "cc", "drcc")


class ModelError(ValueError):
    """The instance cannot produce a feasible model."""


class SolveError(RuntimeError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(message or f"solver returned status {status!r}")
        self.status = status


@dataclass(frozen=True)
class ModeSpec:
    mode: str = "deterministic"
    ambiguity: Optional[AmbiguitySpec] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode != "deterministic" and self.ambiguity is None:
            raise DomainError(f"mode {self.mode!r} needs an AmbiguitySpec")


def empirical_quantile(samples: np.ndarray, alpha: float) -> np.ndarray:
    """Per-period largest ``v`` with at most ``floor(alpha*N)`` samples below it."""
    xi = np.sort(np.atleast_2d(samples), axis=0)
    n = xi.shape[0]
    m = min(int(math.floor(alpha * n + 1e-9)), n - 1)
    return xi[m]


def robust_pv_bounds(samples: np.ndarray, effective_radius: float,
                     norm_kind: str = "inf") -> np.ndarray:
    """Per-sample buffered bounds ``max(0, xi_k,t - r*||e_t||_*)``, shape (N, T)."""
    xi = np.atleast_2d(samples)
    T = xi.shape[1]
    coef = np.array([dual_norm(np.eye(1, T, t).ravel(), norm_kind) for t in range(T)])
    return np.maximum(0.0, xi - effective_radius * coef)


def pv_capacity(instance: ComplexInstance, mode: ModeSpec) -> np.ndarray:
    """PV availability the model dispatches against in ``mode``."""
    pv = instance.pv_samples
    if mode.mode == "deterministic":
        return np.array(pv.nominal, dtype=float)
    amb = mode.ambiguity
    if mode.mode == "cc":
        return empirical_quantile(pv.samples, amb.risk_alpha)
    return robust_pv_bounds(pv.samples, amb.effective_radius_kw, amb.norm_kind).min(axis=0)


def build_model(instance: ComplexInstance, mode: ModeSpec = ModeSpec()) -> lp.LpProblem:
    report = validate_instance(instance)
    if not report.ok:
        raise ModelError("invalid instance: " + "; ".join(report.violations))
    if mode.mode != "deterministic":
        if instance.pv_samples.n_samples < 1:
            raise ModelError(f"mode {mode.mode!r} needs at least one PV sample")

    T, dt = instance.T, instance.dt
    tar, loads, pen = instance.tariff, instance.loads, instance.penalties
    bat = instance.battery
    gmax = instance.grid_limits.max_exchange
    cap = pv_capacity(instance, mode)

    prob = lp.LpProblem()
    prob.meta.update(mode=mode.mode, T=T, pv_capacity=cap, n_ev=len(instance.ev_sessions))
    if mode.ambiguity is not None:
        prob.meta["effective_radius_kw"] = mode.ambiguity.effective_radius_kw
    V = prob.add_var

    p_cap = bat.effective_power_cap
    eta = bat.efficiency
    for t in range(T):
        g = 0.0 if instance.grid_limits.in_outage(t) else gmax
        gb_r = V(f"gb_r[{t}]", 0, g, tar.residential_rate[t] * dt, "grid")
        gb_c = V(f"gb_c[{t}]", 0, g, tar.commercial_rate[t] * dt, "grid")
        gs_c = V(f"gs_c[{t}]", 0, g, -tar.commercial_rate[t] * dt, "grid")
        pv = V(f"pv[{t}]", 0, cap[t], tar.pv_lcoe * dt, "pv")
        pv_r = V(f"pv_r[{t}]", 0, cap[t], 0, "pv")
        pv_c = V(f"pv_c[{t}]", 0, cap[t], 0, "pv")
        crtl = V(f"pv_crtl[{t}]", 0, cap[t], 0, "pv_curtail")
        prob.add_row({pv_r: 1, pv_c: 1, pv: -1}, lp.EQ, 0, f"pv_split[{t}]")
        prob.add_row({pv: 1, crtl: 1}, lp.EQ, cap[t], f"pv_curtail[{t}]")

        ch = V(f"bs_ch[{t}]", 0, p_cap / eta, 0, "bes_power")
        dis = V(f"bs_dis[{t}]", 0, p_cap * eta, 0, "bes_power")
        ch_r = V(f"bs_ch_r[{t}]", 0, p_cap / eta, 0, "bes_split")
        ch_c = V(f"bs_ch_c[{t}]", 0, p_cap / eta, 0, "bes_split")
        dis_r = V(f"bs_dis_r[{t}]", 0, p_cap * eta, 0, "bes_split")
        dis_c = V(f"bs_dis_c[{t}]", 0, p_cap * eta, 0, "bes_split")
        soc = V(f"bs_soc[{t}]", bat.effective_soc_min, bat.effective_soc_max, 0, "bes_soc")
        prob.add_row({ch_r: 1, ch_c: 1, ch: -1}, lp.EQ, 0, f"bes_ch_split[{t}]")
        prob.add_row({dis_r: 1, dis_c: 1, dis: -1}, lp.EQ, 0, f"bes_dis_split[{t}]")
        soc_row = {soc: 1, ch: -eta * dt, dis: dt / eta}
        if t == 0:
            prob.add_row(soc_row, lp.EQ, bat.effective_soc_initial, f"bes_soc[{t}]")
        else:
            soc_row[prob.var(f"bs_soc[{t - 1}]")] = -1
            prob.add_row(soc_row, lp.EQ, 0, f"bes_soc[{t}]")

        res_bal = {gb_r: 1, pv_r: 1, ch_r: -1, dis_r: 1}
        com_bal = {gb_c: 1, gs_c: -1, pv_c: 1, ch_c: -1, dis_c: 1}
        if instance.shedding_enabled:
            res_bal[V(f"shd_r[{t}]", 0, loads.residential[t],
                      pen.residential * dt, "shed")] = 1
            com_bal[V(f"shd_c[{t}]", 0, loads.commercial[t],
                      pen.commercial * dt, "shed")] = 1
            com_bal[V(f"shd_rc[{t}]", 0, loads.residential_common[t],
                      pen.residential_common * dt, "shed")] = 1
        prob.meta.setdefault("_bal", []).append((res_bal, com_bal))

    for i, ev in enumerate(instance.ev_sessions):
        e_cap = ev.capacity
        for tau in range(ev.arrival_period, ev.departure_period + 1):
            if tau == ev.arrival_period:
                lo = hi = ev.soc_arrival * e_cap
            elif tau == ev.departure_period:
                lo = hi = ev.soc_departure * e_cap
            else:
                lo, hi = ev.soc_min * e_cap, ev.soc_max * e_cap
            V(f"ev_soc[{i}][{tau}]", lo, hi, 0, "ev_soc")
        for tau in ev.charging_periods:
            ch = V(f"ev_ch[{i}][{tau}]", 0, ev.charger_power / ev.efficiency, 0, "ev_power")
            dis_ub = ev.charger_power * ev.efficiency if instance.ev_discharge_enabled else 0.0
            dis = V(f"ev_dis[{i}][{tau}]", 0, dis_ub, 0, "ev_power")
            prob.add_row({prob.var(f"ev_soc[{i}][{tau}]"): 1,
                          prob.var(f"ev_soc[{i}][{tau - 1}]"): -1,
                          ch: -ev.efficiency * dt, dis: dt / ev.efficiency},
                         lp.EQ, 0, f"ev_soc[{i}][{tau}]")
            com_bal = prob.meta["_bal"][tau][1]
            com_bal[ch] = -1
            if instance.ev_discharge_enabled:
                com_bal[dis] = 1

    for t, (res_bal, com_bal) in enumerate(prob.meta.pop("_bal")):
        prob.add_row(res_bal, lp.EQ, loads.residential[t], f"bal_res[{t}]")
        prob.add_row(com_bal, lp.EQ, loads.commercial[t] + loads.residential_common[t],
                     f"bal_com[{t}]")

    if mode.mode == "drcc":
        amb = mode.ambiguity
        bounds = robust_pv_bounds(instance.pv_samples.samples, amb.effective_radius_kw,
                                  amb.norm_kind)
        for t in range(T):
            pv = prob.var(f"pv[{t}]")
            for k in range(bounds.shape[0]):
                prob.add_row({pv: 1}, lp.LE, bounds[k, t], f"pv_robust[{t}][{k}]")
    return prob


def _values(problem: lp.LpProblem, x: np.ndarray, fmt: str, T: int) -> np.ndarray:
    out = np.zeros(T)
    for t in range(T):
        name = fmt.format(t)
        if problem.has_var(name):
            out[t] = x[problem.var(name)]
    return out


def extract_schedule(problem: lp.LpProblem, solution: lp.LpSolution,
                     instance: ComplexInstance) -> Schedule:
    if solution.status != lp.OPTIMAL:
        raise SolveError(solution.status)
    T = instance.T
    x = np.clip(solution.x, problem.lower, problem.upper)
    get = lambda fmt: _values(problem, x, fmt, T)
    n_ev = len(instance.ev_sessions)
    ev_ch = np.zeros((n_ev, T))
    ev_dis = np.zeros((n_ev, T))
    ev_soc = np.full((n_ev, T), np.nan)
    for i, ev in enumerate(instance.ev_sessions):
        for tau in range(ev.arrival_period, ev.departure_period + 1):
            ev_soc[i, tau] = x[problem.var(f"ev_soc[{i}][{tau}]")]
        for tau in ev.charging_periods:
            ev_ch[i, tau] = x[problem.var(f"ev_ch[{i}][{tau}]")]
            ev_dis[i, tau] = x[problem.var(f"ev_dis[{i}][{tau}]")]
    sched = Schedule(
        grid_buy_res=get("gb_r[{}]"), grid_buy_com=get("gb_c[{}]"),
        grid_sell_com=get("gs_c[{}]"), pv_total=get("pv[{}]"), pv_res=get("pv_r[{}]"),
        pv_com=get("pv_c[{}]"), pv_curtailed=get("pv_crtl[{}]"),
        bes_charge_res=get("bs_ch_r[{}]"), bes_charge_com=get("bs_ch_c[{}]"),
        bes_discharge_res=get("bs_dis_r[{}]"), bes_discharge_com=get("bs_dis_c[{}]"),
        bes_soc=get("bs_soc[{}]"), ev_charge=ev_ch, ev_discharge=ev_dis, ev_soc=ev_soc,
        shed_res=get("shd_r[{}]"), shed_com=get("shd_c[{}]"), shed_rescom=get("shd_rc[{}]"),
        pv_capacity=np.array(problem.meta.get("pv_capacity", np.full(T, np.nan)), dtype=float),
    )
    sched.cost_terms = objective_breakdown(sched, instance.tariff, instance.penalties,
                                           instance.dt)
    sched.total_cost = sched.cost_terms.total
    return sched


def objective_breakdown(schedule: Schedule, tariff: Tariff, penalties: VollPenalties,
                        dt: float = 1.0) -> CostReport:
    s = schedule
    return CostReport(
        commercial=float(np.dot(s.grid_buy_com - s.grid_sell_com, tariff.commercial_rate) * dt),
        residential=float(np.dot(s.grid_buy_res, tariff.residential_rate) * dt),
        pv=float(s.pv_total.sum() * tariff.pv_lcoe * dt),
        shed_residential=float(s.shed_res.sum() * penalties.residential * dt),
        shed_commercial=float(s.shed_com.sum() * penalties.commercial * dt),
        shed_residential_common=float(s.shed_rescom.sum() * penalties.residential_common * dt),
    )


def solve_instance(instance: ComplexInstance, mode: ModeSpec = ModeSpec(),
                   **solver_kw) -> tuple[Schedule, lp.LpProblem, lp.LpSolution]:
    """Build, solve and extract in one call. Raises :class:`SolveError`."""
    problem = build_model(instance, mode)
    solution = lp.solve(problem, **solver_kw)
    return extract_schedule(problem, solution, instance), problem, solution


# ---------------------------------------------------------------------------
# generic Wasserstein DR terms for affine data dependence
#
# A LinExpr is ``(coeffs, constant)`` with ``coeffs`` a {var index: coef} dict.

LinExpr = tuple[dict, float]


def _dual_norm_epigraph(prob: lp.LpProblem, vec: Sequence[LinExpr], norm_kind: str,
                        tag: str) -> int:
    """Add an auxiliary ``s >= ||vec(x)||_*`` and return its index."""
    s = prob.add_var(f"{tag}_dn", 0.0, math.inf, 0.0, tag)
    if norm_kind == "inf":
        # dual is the 1-norm: s >= sum_j u_j, u_j >= |a_j(x)|
        terms = {s: -1.0}
        for j, (coeffs, const) in enumerate(vec):
            u = prob.add_var(f"{tag}_u[{j}]", 0.0, math.inf, 0.0, tag)
            terms[u] = 1.0
            for sign in (1.0, -1.0):
                row = {k: sign * v for k, v in coeffs.items()}
                row[u] = row.get(u, 0.0) - 1.0
                prob.add_row(row, lp.LE, -sign * const, f"{tag}_abs[{j}]")
        prob.add_row(terms, lp.LE, 0.0, f"{tag}_sum")
    elif norm_kind == "one":
        # dual is the inf-norm: s >= |a_j(x)| for every j
        for j, (coeffs, const) in enumerate(vec):
            for sign in (1.0, -1.0):
                row = {k: sign * v for k, v in coeffs.items()}
                row[s] = row.get(s, 0.0) - 1.0
                prob.add_row(row, lp.LE, -sign * const, f"{tag}_max[{j}]")
    else:
        raise DomainError("the 2-norm dual needs a conic constraint; use 'one' or 'inf'")
    return s


def add_dr_constraint(prob: lp.LpProblem, h0: LinExpr, a: Sequence[LinExpr],
                      samples: np.ndarray, delta: float, norm_kind: str = "inf",
                      tag: str = "drcc") -> list[int]:
    """Rows ``h0(x) + a(x).xi_i + delta*||a(x)||_* <= 0`` for every sample ``xi_i``."""
    xi = np.atleast_2d(np.asarray(samples, dtype=float))
    if xi.shape[1] != len(a):
        raise DomainError(f"samples have dimension {xi.shape[1]}, a has {len(a)}")
    constant = all(not coeffs for coeffs, _ in a)
    if constant:
        reg_const = delta * dual_norm([c for _, c in a], norm_kind)
        reg_var = None
    else:
        reg_const = 0.0
        reg_var = _dual_norm_epigraph(prob, a, norm_kind, tag)
    rows = []
    h_coeffs, h_const = h0
    for i, sample in enumerate(xi):
        row = dict(h_coeffs)
        const = h_const + reg_const
        for (coeffs, c0), v in zip(a, sample):
            for k, coef in coeffs.items():
                row[k] = row.get(k, 0.0) + coef * v
            const += c0 * v
        if reg_var is not None:
            row[reg_var] = row.get(reg_var, 0.0) + delta
        rows.append(prob.add_row(row, lp.LE, -const, f"{tag}[{i}]"))
    return rows


def add_dr_objective(prob: lp.LpProblem, b: Sequence[LinExpr], samples: np.ndarray,
                     delta: float, norm_kind: str = "inf", tag: str = "dro_obj") -> None:
    """Add ``mean_i b(x).xi_i + delta*||b(x)||_*`` to the objective."""
    xi = np.atleast_2d(np.asarray(samples, dtype=float))
    if xi.shape[1] != len(b):
        raise DomainError(f"samples have dimension {xi.shape[1]}, b has {len(b)}")
    mean = xi.mean(axis=0)
    for (coeffs, const), m in zip(b, mean):
        for k, coef in coeffs.items():
            prob.add_obj(k, coef * m)
        prob.offset += const * m
    if all(not coeffs for coeffs, _ in b):
        prob.offset += delta * dual_norm([c for _, c in b], norm_kind)
    else:
        s = _dual_norm_epigraph(prob, b, norm_kind, tag)
        prob.add_obj(s, delta)
