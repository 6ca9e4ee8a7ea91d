"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together at the
end of the pytest run (see conftest.py) and also to stdout with ``-s``.
"""

import time

import numpy as np
import pytest

from drcc_ems import lp
from drcc_ems.analysis import (DEFAULT_ALPHAS, ambiguity_for, out_of_sample_eval,
                               resilience_index_from_ens, resilience_run, sensitivity_sweep)
from drcc_ems.core import PvSampleSet, gasoline_equivalent
from drcc_ems.ingest import synth_instance, synth_pv_samples
from drcc_ems.model import ModeSpec, SolveError, solve_instance
from drcc_ems.wasserstein import estimate_c, radius, wasserstein_1d

from conftest import assert_schedule_physics, problem_from_arrays, toy_instance
from oracles import random_bounded_lp, transport_w1, vertex_enumeration

RESULTS: list[str] = []


def record(label: str, ok: bool, detail: str) -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def check_ev_targets(instance, sched) -> bool:
    return all(abs(sched.ev_soc[i, ev.departure_period] - ev.soc_departure * ev.capacity) <= 1e-9
               for i, ev in enumerate(instance.ev_sessions))


def test_criterion_1_radius():
    value = radius(1.36, 365, 0.05)
    n = 1000
    t0 = time.perf_counter()
    for _ in range(n):
        radius(1.36, 365, 0.05)
    per_call = (time.perf_counter() - t0) / n
    ok = abs(value - 0.016123) <= 1e-6 and per_call < 1e-3
    record("criterion 1 (radius)", ok, f"radius={value:.9f} target 0.016123±1e-6, "
           f"{per_call * 1e6:.2f} us/call")
    assert ok


def test_criterion_2_fuel():
    pv = gasoline_equivalent(0.088, 24.2, 4.4)
    share = pv / 3.56
    grid_pct = 100 * gasoline_equivalent(0.21, 24.2, 4.4) / 3.56
    ok = 0.48 <= pv <= 0.49 and 0.13 <= share <= 0.14 and round(grid_pct, 1) == 32.4
    record("criterion 2 (fuel)", ok, f"pv {pv:.4f} $/gal = {100 * share:.2f}%, "
           f"0.21 $/kWh = {grid_pct:.2f}% of 3.56")
    assert ok


@pytest.fixture(scope="module")
def synthetic_instance():
    return synth_instance(42, 365)


def test_criterion_3_cost_ordering(synthetic_instance):
    t0 = time.perf_counter()
    rows = sensitivity_sweep(synthetic_instance, DEFAULT_ALPHAS)
    elapsed = time.perf_counter() - t0
    ordered = all(r.cost_deterministic <= r.cost_cc <= r.cost_drcc for r in rows)
    drcc = [r.cost_drcc for r in rows]
    monotone = all(b <= a for a, b in zip(drcc, drcc[1:]))
    ok = ordered and monotone and elapsed < 60 and all(r.status == "optimal" for r in rows)
    table = ", ".join(f"a={r.alpha:g}:{r.cost_deterministic:.1f}/{r.cost_cc:.1f}/"
                      f"{r.cost_drcc:.1f}" for r in rows)
    record("criterion 3 (cost ordering)", ok, f"{table}; sweep {elapsed:.1f}s")
    assert ok


def test_criterion_4_resilience(synthetic_instance):
    reports = [resilience_run(synthetic_instance, s) for s in (1.0, 0.75, 0.5)]
    ri = [r.resilience_index for r in reports]
    monotone = ri[0] > ri[1] > ri[2]
    published_ens = (1.17 + 0.3 + 0.03, 1.4 + 0.51 + 0.08, 1.98 + 0.51 + 0.08)
    rebuilt = [resilience_index_from_ens(e, 7.54) for e in published_ens]
    close = all(abs(a - b) <= 0.5 for a, b in zip(rebuilt, (80.1, 73.5, 65.6)))
    ok = monotone and close
    record("criterion 4 (resilience)", ok,
           "synthetic RI " + " > ".join(f"{v:.2f}" for v in ri)
           + "; printed-ENS RI " + "/".join(f"{v:.2f}" for v in rebuilt) + " vs 80.1/73.5/65.6")
    assert ok


def test_criterion_5_solver_oracle():
    rng = np.random.default_rng(20240501)
    mismatches, counts = 0, {}
    n = 200
    for _ in range(n):
        A, senses, b, c, lb, ub = random_bounded_lp(rng)
        status, value = vertex_enumeration(A, senses, b, c, lb, ub)
        sol = lp.solve(problem_from_arrays(A, senses, b, c, lb, ub))
        counts[status] = counts.get(status, 0) + 1
        if sol.status != status or (status == "optimal" and abs(sol.objective - value) > 1e-6):
            mismatches += 1
    ok = mismatches == 0
    record("criterion 5 (solver oracle)", ok, f"{n} LPs {counts}, {mismatches} mismatches")
    assert ok


def test_criterion_6_model(synthetic_instance):
    toy = toy_instance()
    sched, _, _ = solve_instance(toy)
    exact = abs(sched.total_cost - 2.88) <= 1e-9
    instances = [toy, synthetic_instance, synthetic_instance.with_full_outage()]
    solved = failures = 0
    for inst in instances:
        for mode in ("deterministic", "cc", "drcc"):
            spec = ModeSpec(mode, None if mode == "deterministic"
                            else ambiguity_for(inst, 0.05))
            try:
                s, _, _ = solve_instance(inst, spec)
            except SolveError:
                # islanded drcc cannot meet the EV targets; nothing to check
                continue
            solved += 1
            try:
                assert_schedule_physics(inst, s)
            except AssertionError:
                failures += 1
    ok = exact and failures == 0 and solved > 0
    record("criterion 6 (model)", ok, f"toy cost {sched.total_cost!r}; "
           f"{solved - failures}/{solved} solved schedules pass balance 1e-6 and SOC 1e-9 "
           f"({3 * len(instances) - solved} infeasible skipped)")
    assert ok


def test_criterion_7_wasserstein():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 9))
        p, q = rng.uniform(0, 10, k), rng.uniform(-2, 8, k)
        worst = max(worst, abs(wasserstein_1d(p, q) - transport_w1(p, q)))
    w1_ok = worst <= 1e-9
    est = estimate_c([[0.0], [2.0]], eta_grid=[0.5], scale=1.0)
    on_curve = float(est.curve[0, 1])
    c_ok = abs(on_curve - 2.11709) <= 1e-4
    record("criterion 7 (wasserstein)", w1_ok and c_ok,
           f"W1 vs transport LP max err {worst:.1e} on 100 pairs; "
           f"C(eta=0.5) on {{0,2}} = {on_curve:.6f} vs stated 2.11709 "
           "(the stated C expression gives 2*sqrt(1.5) = 2.449490 here)")
    assert w1_ok
    assert c_ok


def test_criterion_8_out_of_sample():
    t0 = time.perf_counter()
    rates = []
    for seed in range(20):
        inst = synth_instance(seed, 100)
        amb = ambiguity_for(inst, 0.05)
        sched, _, _ = solve_instance(inst, ModeSpec("drcc", amb))
        fresh = synth_pv_samples(np.random.default_rng(10_000 + seed), 1000, inst.T)
        rates.append(out_of_sample_eval(sched, PvSampleSet(fresh)))
    elapsed = time.perf_counter() - t0
    ok = max(rates) <= 0.05 and elapsed < 300
    record("criterion 8 (out-of-sample)", ok, f"max violation rate {max(rates):.4f} over "
           f"20 seeds, {elapsed:.1f}s")
    assert ok


def test_criterion_9_ev_targets(synthetic_instance):
    solves = 0
    misses = 0
    cases = [(synthetic_instance, ModeSpec())]
    for a in DEFAULT_ALPHAS:
        amb = ambiguity_for(synthetic_instance, a)
        cases += [(synthetic_instance, ModeSpec("cc", amb)),
                  (synthetic_instance, ModeSpec("drcc", amb))]
    for s in (1.0, 0.75, 0.5):
        cases.append((synthetic_instance.with_battery_scale(s).with_full_outage(), ModeSpec()))
    for seed in range(5):
        inst = synth_instance(seed, 100)
        cases.append((inst, ModeSpec("drcc", ambiguity_for(inst, 0.05))))
    for inst, spec in cases:
        sched, _, sol = solve_instance(inst, spec)
        solves += 1
        if not check_ev_targets(inst, sched):
            misses += 1
    ok = misses == 0 and solves > 0
    record("criterion 9 (EV departure SOC)", ok,
           f"{solves - misses}/{solves} solves hit 95/100/90/80/90% of 75 kWh")
    assert ok
