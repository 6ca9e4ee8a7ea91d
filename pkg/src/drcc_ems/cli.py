"""Command-line front end.

Exit codes: 0 optimal, 1 usage or input error, 2 infeasible, 3 internal.
All outputs go to ``--out``; environment variables are not consulted.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, lp
from .analysis import (DEFAULT_ALPHAS, DEFAULT_C, fuel_report, resilience_run,
                       sensitivity_sweep, violation_table, write_rows)
from .core import DomainError, PvSampleSet
from .ingest import (IngestError, InstanceConfig, load_instance, read_table,
                     synth_pv_samples, write_schedule_csv)
from .model import MODES, ModelError, ModeSpec, build_model, extract_schedule
from .wasserstein import NORMS, AmbiguitySpec, estimate_c, radius

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def resolve_config(path: str) -> Path:
    """``bundled:<name>`` refers to a config shipped in the package."""
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        ref = resources.files("drcc_ems") / "data" / f"{name}.ini"
        if not ref.is_file():
            raise UsageError(f"no bundled config named {name!r}")
        return Path(str(ref))
    return Path(path)


def _load(args) -> tuple[InstanceConfig, object]:
    cfg = InstanceConfig.from_file(resolve_config(args.config))
    if args.seed is not None and cfg.synthetic_seed is not None:
        cfg.synthetic_seed = args.seed
    return cfg, load_instance(cfg)


def _ambiguity(args, cfg: InstanceConfig, instance, alpha=None) -> AmbiguitySpec:
    amb = cfg.ambiguity
    alpha = alpha if alpha is not None else (
        args.alpha if args.alpha is not None else float(amb.get("alpha", 0.05)))
    beta = args.beta if args.beta is not None else float(amb.get("beta", 0.05))
    c = args.c if args.c is not None else float(amb.get("constant_c", DEFAULT_C))
    norm = args.norm or amb.get("norm", "inf")
    return AmbiguitySpec(c, beta, alpha, norm, instance.pv_samples.n_samples)


def _check_fraction(name, value):
    if value is not None and not 0 < value < 1:
        raise UsageError(f"--{name} must lie in (0, 1), got {value}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, cfg: InstanceConfig, extra: dict) -> None:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(cfg).items()
                if k != "ev_sessions"}
    if cfg.ev_sessions is not None:
        resolved["ev_sessions"] = [asdict(ev) for ev in cfg.ev_sessions]
    manifest = {
        "version": __version__,
        "command": args.command,
        "config": resolved,
        "flags": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": cfg.synthetic_seed,
        **extra,
    }
    tmp = out / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    os.replace(tmp, out / "manifest.json")


def cmd_run(args) -> int:
    _check_fraction("alpha", args.alpha)
    _check_fraction("beta", args.beta)
    cfg, instance = _load(args)
    mode = ModeSpec(args.mode, None if args.mode == "deterministic"
                    else _ambiguity(args, cfg, instance))
    out = _out_dir(args)
    t0 = time.perf_counter()
    problem = build_model(instance, mode)
    artifacts = []
    if args.export_lp:
        (out / "model.mps").write_text(lp.export_standard(problem), encoding="utf-8")
        artifacts.append("model.mps")
    solution = lp.solve(problem)
    extra = {"mode": args.mode, "status": solution.status,
             "solver_iterations": solution.iterations,
             "wall_clock_s": round(time.perf_counter() - t0, 6)}
    if mode.ambiguity is not None:
        a = mode.ambiguity
        extra["ambiguity"] = {**asdict(a), "radius": a.radius,
                              "effective_radius": a.effective_radius,
                              "effective_radius_kw": a.effective_radius_kw}
    if not solution.optimal:
        extra["artifacts"] = artifacts
        _write_manifest(out, args, cfg, extra)
        print(f"solve failed: {solution.status}", file=sys.stderr)
        return EXIT_INFEASIBLE if solution.status == lp.INFEASIBLE else EXIT_INTERNAL
    sched = extract_schedule(problem, solution, instance)
    write_schedule_csv(sched, out / "schedule.csv")
    with open(out / "costs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "cost"])
        for name, value in zip(sched.cost_terms.TERMS, sched.cost_terms.as_tuple()):
            w.writerow([name, repr(value)])
        w.writerow(["total", repr(sched.total_cost)])
    extra["artifacts"] = artifacts + ["schedule.csv", "costs.csv"]
    extra["total_cost"] = sched.total_cost
    _write_manifest(out, args, cfg, extra)
    print(f"{args.mode}: optimal, total cost {sched.total_cost:.6f} $")
    return EXIT_OK


def cmd_sweep(args) -> int:
    alphas = args.alphas
    if not alphas:
        raise UsageError("--alphas is empty")
    for a in alphas:
        _check_fraction("alphas", a)
    _check_fraction("beta", args.beta)
    cfg, instance = _load(args)
    amb = _ambiguity(args, cfg, instance, alpha=alphas[0])
    out = _out_dir(args)
    t0 = time.perf_counter()
    try:
        rows = sensitivity_sweep(instance, sorted(alphas), amb.confidence_beta,
                                 amb.constant_c, amb.norm_kind, workers=args.workers)
    except DomainError as exc:
        raise UsageError(str(exc))
    write_rows(out / "sweep.csv", rows)
    _write_manifest(out, args, cfg, {"artifacts": ["sweep.csv"],
                                     "wall_clock_s": round(time.perf_counter() - t0, 6)})
    for r in rows:
        print(f"alpha={r.alpha:g}  det={r.cost_deterministic:.3f}  cc={r.cost_cc:.3f}  "
              f"drcc={r.cost_drcc:.3f}  [{r.status}]")
    return EXIT_OK if all(r.status == lp.OPTIMAL for r in rows) else EXIT_INFEASIBLE


def cmd_resilience(args) -> int:
    scales = args.scales
    if not scales:
        raise UsageError("--scales is empty")
    for s in scales:
        if not 0 < s <= 1:
            raise UsageError(f"battery scale must lie in (0, 1], got {s}")
    cfg, instance = _load(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    reports = [resilience_run(instance, s) for s in scales]
    write_rows(out / "resilience.csv", reports)
    _write_manifest(out, args, cfg, {"artifacts": ["resilience.csv"],
                                     "wall_clock_s": round(time.perf_counter() - t0, 6)})
    for r in reports:
        print(f"scale={r.battery_scale:g}  ENS={r.ens_total:.3f} MWh  RI={r.resilience_index:.2f}%")
    return EXIT_OK


def cmd_estimate(args) -> int:
    _check_fraction("beta", args.beta)
    cfg, instance = _load(args)
    out = _out_dir(args)
    norm = args.norm or cfg.ambiguity.get("norm", "inf")
    beta = args.beta if args.beta is not None else float(cfg.ambiguity.get("beta", 0.05))
    est = estimate_c(instance.pv_samples, norm_kind=norm)
    n = instance.pv_samples.n_samples
    eps = radius(est.c, n, beta)
    with open(out / "c_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "c_value"])
        for e, v in est.curve_rows():
            w.writerow([repr(e), repr(v)])
    _write_manifest(out, args, cfg, {"artifacts": ["c_curve.csv"], "c": est.c,
                                     "eta_star": est.eta_star, "radius": eps,
                                     "n_samples": n, "beta": beta})
    print(f"C = {est.c!r}")
    print(f"eta* = {est.eta_star!r}")
    print(f"radius(N={n}, beta={beta}) = {eps!r}")
    return EXIT_OK


def cmd_fuel(args) -> int:
    cfg, instance = _load(args)
    out = _out_dir(args)
    rows = fuel_report(instance.tariff, args.mpg, args.mi_per_kwh, args.gas_price,
                       args.miles_per_month)
    write_rows(out / "fuel.csv", rows)
    _write_manifest(out, args, cfg, {"artifacts": ["fuel.csv"]})
    for r in rows:
        print(f"{r.source}: {r.elec_price:g} $/kWh = {r.gasoline_equivalent:.3f} $/gal "
              f"({r.percent_of_gasoline:.1f}% of gasoline)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _check_fraction("alpha", args.alpha)
    _check_fraction("beta", args.beta)
    cfg, instance = _load(args)
    if args.holdout:
        _, data = read_table(args.holdout, prefix="sample_")
        holdout = PvSampleSet(data.T)
    else:
        seed = (args.seed if args.seed is not None else 0) + 1_000_003
        holdout = PvSampleSet(synth_pv_samples(np.random.default_rng(seed),
                                               args.holdout_samples, instance.T))
    amb = _ambiguity(args, cfg, instance)
    out = _out_dir(args)
    rows = violation_table(instance, holdout, amb.risk_alpha, amb.confidence_beta,
                           amb.constant_c, amb.norm_kind)
    write_rows(out / "violations.csv", rows)
    _write_manifest(out, args, cfg, {"artifacts": ["violations.csv"],
                                     "holdout_samples": holdout.n_samples})
    for r in rows:
        print(f"{r.mode}: violation rate {r.violation_rate:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drcc-ems", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, ambiguity=True):
        p.add_argument("config", help="instance config (.ini) or bundled:<name>")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="override the synthetic data seed")
        if ambiguity:
            p.add_argument("--beta", type=float, help="ambiguity-set confidence parameter")
            p.add_argument("--norm", choices=NORMS, help="sample-space norm")
            p.add_argument("--c", type=float, help="Wasserstein constant C (default 1.36)")

    p = sub.add_parser("run", help="solve one instance")
    common(p)
    p.add_argument("--mode", choices=MODES, default="deterministic")
    p.add_argument("--alpha", type=float, help="risk level for cc/drcc")
    p.add_argument("--export-lp", action="store_true", help="also write model.mps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="cost vs. risk level for all modes")
    common(p)
    p.add_argument("--alphas", type=_float_list, default=list(DEFAULT_ALPHAS))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("resilience", help="islanded operation with scaled battery")
    common(p, ambiguity=False)
    p.add_argument("--scales", type=_float_list, default=[1.0, 0.75, 0.5])
    p.set_defaults(func=cmd_resilience)

    p = sub.add_parser("estimate", help="estimate C and the ambiguity radius")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fuel", help="gasoline-equivalent energy prices")
    common(p, ambiguity=False)
    p.add_argument("--mpg", type=float, default=24.2)
    p.add_argument("--mi-per-kwh", type=float, default=4.4)
    p.add_argument("--gas-price", type=float, default=3.56)
    p.add_argument("--miles-per-month", type=float, default=1000.0)
    p.set_defaults(func=cmd_fuel)

    p = sub.add_parser("evaluate", help="out-of-sample PV violation rates")
    common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--holdout", help="PV sample CSV; default draws fresh synthetic samples")
    p.add_argument("--holdout-samples", type=int, default=1000)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, IngestError, DomainError, ModelError) as exc:
        print(f"drcc-ems: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"drcc-ems: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
