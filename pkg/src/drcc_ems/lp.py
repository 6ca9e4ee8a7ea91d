"""Sparse LP container, a bounded-variable primal simplex and MPS I/O.

The solver works on ``min c.x`` subject to rows ``a.x {<=,=,>=} b`` and
``lb <= x <= ub`` (bounds may be infinite). It is a dense revised simplex:
two phases, Dantzig pricing with a switch to Bland's rule after a run of
degenerate pivots, periodic refactorization of the basis inverse.

Tolerances: feasibility 1e-7 (relative to the row scale), optimality
(reduced cost) 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64
_DEGENERATE_RUN = 30


class LpError(ValueError):
    pass


@dataclass
class Row:
    index: np.ndarray
    value: np.ndarray
    sense: str
    rhs: float
    tag: str = ""


@dataclass
class LpProblem:
    """Variables with bounds and objective coefficients plus sparse rows.

    ``var_tags`` / ``Row.tag`` carry free-form metadata (the model uses them
    to map back to constraint groups).
    """

    names: list[str] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    var_tags: list[str] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    offset: float = 0.0
    meta: dict = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf,
                obj: float = 0.0, tag: str = "") -> int:
        if name in self._index:
            raise LpError(f"duplicate variable {name!r}")
        if lower > upper:
            raise LpError(f"variable {name!r}: lower bound {lower} > upper bound {upper}")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.objective.append(float(obj))
        self.var_tags.append(tag)
        return len(self.names) - 1

    def var(self, name: str) -> int:
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def add_obj(self, j: int, coef: float) -> None:
        self.objective[j] += coef

    def add_row(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                sense: str, rhs: float, tag: str = "") -> int:
        if sense not in SENSES:
            raise LpError(f"unknown relation {sense!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = {}
        for j, a in items:
            if not 0 <= j < self.n_vars:
                raise LpError(f"row {tag!r} references undeclared variable {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        idx = np.fromiter(merged.keys(), dtype=int, count=len(merged))
        val = np.fromiter(merged.values(), dtype=float, count=len(merged))
        self.rows.append(Row(idx, val, sense, float(rhs), tag))
        return len(self.rows) - 1

    def arrays(self):
        """Dense ``(A, senses, rhs, c, lb, ub)``."""
        A = np.zeros((self.n_rows, self.n_vars))
        for i, row in enumerate(self.rows):
            A[i, row.index] = row.value
        senses = [r.sense for r in self.rows]
        rhs = np.array([r.rhs for r in self.rows], dtype=float)
        return (A, senses, rhs, np.array(self.objective, dtype=float),
                np.array(self.lower, dtype=float), np.array(self.upper, dtype=float))

    def objective_value(self, x) -> float:
        return float(np.dot(self.objective, x)) + self.offset


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: Optional[float]
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class Residuals:
    """Signed worst violations; positive means violated."""

    bound: float
    row: float
    worst_bound_var: Optional[str]
    worst_row: Optional[int]
    row_violations: np.ndarray

    def feasible(self, tol: float = FEAS_TOL) -> bool:
        return self.bound <= tol and self.row <= tol


def check_point(problem: LpProblem, point) -> Residuals:
    """Report how far ``point`` is from satisfying bounds and rows.

    Row violations are scaled by ``max(1, |rhs|)`` to match the solver's
    relative feasibility tolerance.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (problem.n_vars,):
        raise LpError(f"point has shape {x.shape}, expected ({problem.n_vars},)")
    lb = np.array(problem.lower)
    ub = np.array(problem.upper)
    with np.errstate(invalid="ignore"):
        bviol = np.maximum(np.nan_to_num(lb - x, nan=-np.inf, neginf=-np.inf),
                           np.nan_to_num(x - ub, nan=-np.inf, neginf=-np.inf))
    worst_var = int(np.argmax(bviol)) if len(bviol) else None
    bmax = float(bviol[worst_var]) if len(bviol) else -math.inf
    rviol = np.empty(problem.n_rows)
    for i, row in enumerate(problem.rows):
        lhs = float(np.dot(row.value, x[row.index]))
        gap = lhs - row.rhs
        if row.sense == LE:
            v = gap
        elif row.sense == GE:
            v = -gap
        else:
            v = abs(gap)
        rviol[i] = v / max(1.0, abs(row.rhs))
    worst_row = int(np.argmax(rviol)) if len(rviol) else None
    rmax = float(rviol[worst_row]) if len(rviol) else -math.inf
    return Residuals(bmax, rmax, problem.names[worst_var] if worst_var is not None else None,
                     worst_row, rviol)


# ---------------------------------------------------------------------------
# presolve


def _presolve(problem: LpProblem, tol: float):
    """Fold singleton and empty rows into bounds.

    Returns ``(A, senses, rhs, c, lb, ub)`` for the reduced row set, or
    ``None`` if a folded row proves infeasibility.
    """
    n = problem.n_vars
    lb = np.array(problem.lower, dtype=float)
    ub = np.array(problem.upper, dtype=float)
    kept: list[Row] = []
    for row in problem.rows:
        nz = row.value != 0
        idx, val = row.index[nz], row.value[nz]
        scale = max(1.0, abs(row.rhs))
        if len(idx) == 0:
            if ((row.sense == LE and row.rhs < -tol * scale)
                    or (row.sense == GE and row.rhs > tol * scale)
                    or (row.sense == EQ and abs(row.rhs) > tol * scale)):
                return None
            continue
        if len(idx) == 1:
            j, a = int(idx[0]), float(val[0])
            bound = row.rhs / a
            sense = row.sense
            if a < 0 and sense != EQ:
                sense = GE if sense == LE else LE
            if sense in (LE, EQ):
                ub[j] = min(ub[j], bound)
            if sense in (GE, EQ):
                lb[j] = max(lb[j], bound)
            continue
        kept.append(row)
    width = np.maximum(1.0, np.maximum(np.abs(np.where(np.isfinite(lb), lb, 0)),
                                       np.abs(np.where(np.isfinite(ub), ub, 0))))
    if np.any(lb > ub + tol * width):
        return None
    ub = np.maximum(ub, lb)
    A = np.zeros((len(kept), n))
    for i, row in enumerate(kept):
        A[i, row.index] = row.value
    return (A, [r.sense for r in kept], np.array([r.rhs for r in kept], dtype=float),
            np.array(problem.objective, dtype=float), lb, ub)


# ---------------------------------------------------------------------------
# simplex core

_BASIC, _AT_LB, _AT_UB, _FREE = 0, 1, 2, 3


class _Simplex:
    """Revised bounded simplex on ``A x = b, lb <= x <= ub``."""

    def __init__(self, A, b, lb, ub, x, basis, state, tol, opt_tol):
        self.A, self.b, self.lb, self.ub = A, b, lb, ub
        self.x, self.basis, self.state = x, basis, state
        self.tol, self.opt_tol = tol, opt_tol
        self.m = A.shape[0]
        self.iterations = 0
        self.refactor()

    def refactor(self) -> None:
        if self.m == 0:
            self.B_inv = np.zeros((0, 0))
            return
        self.B_inv = np.linalg.inv(self.A[:, self.basis])
        nonbasic = self.state != _BASIC
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.B_inv @ rhs

    def run(self, c: np.ndarray, max_iters: int) -> str:
        bland = False
        degenerate = 0
        since_refactor = 0
        fixed = self.ub - self.lb <= 0
        while True:
            if self.iterations >= max_iters:
                return ITERATION_LIMIT
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            y = c[self.basis] @ self.B_inv if self.m else np.zeros(0)
            d = c - y @ self.A if self.m else c.copy()
            st = self.state
            score = np.zeros_like(d)
            score[(st == _AT_LB) & (d < -self.opt_tol)] = 1.0
            score[(st == _AT_UB) & (d > self.opt_tol)] = 1.0
            score[(st == _FREE) & (np.abs(d) > self.opt_tol)] = 1.0
            score[fixed] = 0.0
            eligible = np.flatnonzero(score)
            if len(eligible) == 0:
                return OPTIMAL
            if bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if d[j] < 0 else -1.0
            alpha = self.B_inv @ self.A[:, j] if self.m else np.zeros(0)
            theta, leave, leave_to_ub = self._ratio(alpha, direction, bland)
            flip = self.ub[j] - self.lb[j]
            if flip <= theta:
                theta, leave = flip, None
            if not math.isfinite(theta):
                return UNBOUNDED
            self.iterations += 1
            since_refactor += 1
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= _DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False
            self.x[j] += direction * theta
            if self.m:
                self.x[self.basis] -= direction * theta * alpha
            if leave is None:
                self.state[j] = _AT_UB if direction > 0 else _AT_LB
                self.x[j] = self.ub[j] if direction > 0 else self.lb[j]
                continue
            out = self.basis[leave]
            self.x[out] = self.ub[out] if leave_to_ub else self.lb[out]
            self.state[out] = _AT_UB if leave_to_ub else _AT_LB
            self.state[j] = _BASIC
            self.basis[leave] = j
            pivot_row = self.B_inv[leave] / alpha[leave]
            self.B_inv -= np.outer(alpha, pivot_row)
            self.B_inv[leave] = pivot_row

    def _ratio(self, alpha, direction, bland):
        """Longest step before a basic variable hits a bound."""
        if self.m == 0:
            return math.inf, None, False
        rate = -direction * alpha
        xb = self.x[self.basis]
        lbb = self.lb[self.basis]
        ubb = self.ub[self.basis]
        limits = np.full(self.m, math.inf)
        to_ub = np.zeros(self.m, dtype=bool)
        dec = rate < -_PIVOT_TOL
        inc = rate > _PIVOT_TOL
        with np.errstate(invalid="ignore", divide="ignore"):
            limits[dec] = (xb[dec] - lbb[dec]) / -rate[dec]
            limits[inc] = (ubb[inc] - xb[inc]) / rate[inc]
        to_ub[inc] = True
        limits = np.where(np.isnan(limits), math.inf, np.maximum(limits, 0.0))
        theta = float(limits.min())
        if not math.isfinite(theta):
            return math.inf, None, False
        ties = np.flatnonzero(limits <= theta + 1e-12)
        if bland:
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
        else:
            r = int(ties[np.argmax(np.abs(alpha[ties]))])
        return theta, r, bool(to_ub[r])


def solve(problem: LpProblem, tol: float = FEAS_TOL, max_iters: int = 100_000,
          opt_tol: float = OPT_TOL) -> LpSolution:
    """Solve ``problem`` to optimality, or certify infeasible/unbounded."""
    pre = _presolve(problem, tol)
    if pre is None:
        return LpSolution(INFEASIBLE, None, None, 0)
    A, senses, b, c, lb, ub = pre
    m, n = A.shape

    # structural nonbasic start: a finite bound, else zero
    x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    state = np.where(np.isfinite(lb), _AT_LB, np.where(np.isfinite(ub), _AT_UB, _FREE))

    slack_lb = np.array([0.0 if s in (LE, EQ) else -math.inf for s in senses])
    slack_ub = np.array([0.0 if s in (GE, EQ) else math.inf for s in senses])
    resid = b - A @ x
    scale = np.maximum(1.0, np.abs(b))
    slack_ok = (resid >= slack_lb - tol * scale) & (resid <= slack_ub + tol * scale)
    art_rows = np.flatnonzero(~slack_ok)
    k = len(art_rows)

    A_full = np.zeros((m, n + m + k))
    A_full[:, :n] = A
    A_full[:, n:n + m] = np.eye(m)
    signs = np.sign(resid[art_rows])
    signs[signs == 0] = 1.0
    A_full[art_rows, n + m + np.arange(k)] = signs

    lb_full = np.concatenate([lb, slack_lb, np.zeros(k)])
    ub_full = np.concatenate([ub, slack_ub, np.full(k, math.inf)])
    x_full = np.concatenate([x, np.zeros(m), np.zeros(k)])
    state_full = np.concatenate([state, np.full(m, _AT_LB), np.zeros(k, dtype=int)])
    basis = np.empty(m, dtype=int)
    for i in range(m):
        if slack_ok[i]:
            basis[i] = n + i
            state_full[n + i] = _BASIC
    for a, i in enumerate(art_rows):
        basis[i] = n + m + a
        # slack sits at its (finite) bound nearest the residual
        s_val = 0.0
        x_full[n + i] = s_val
        state_full[n + i] = _AT_LB if math.isfinite(slack_lb[i]) else _AT_UB
    state_full[basis] = _BASIC

    smp = _Simplex(A_full, b, lb_full, ub_full, x_full, basis, state_full, tol, opt_tol)

    if k:
        c1 = np.zeros(n + m + k)
        c1[n + m:] = 1.0
        status = smp.run(c1, max_iters)
        if status == ITERATION_LIMIT:
            return LpSolution(ITERATION_LIMIT, None, None, smp.iterations)
        smp.refactor()
        infeas = float(smp.x[n + m:].sum())
        if infeas > tol * float(scale.max()):
            return LpSolution(INFEASIBLE, None, None, smp.iterations)
        _drive_out_artificials(smp, n + m)
        smp.ub[n + m:] = 0.0
        smp.x[n + m:] = np.clip(smp.x[n + m:], 0.0, 0.0)
        smp.state[n + m:][smp.state[n + m:] != _BASIC] = _AT_LB
        smp.refactor()

    c2 = np.concatenate([c, np.zeros(m + k)])
    status = smp.run(c2, max_iters)
    if status != OPTIMAL:
        return LpSolution(status, None, None, smp.iterations)
    smp.refactor()
    xs = smp.x[:n].copy()
    # snap nonbasic structurals exactly onto their bounds
    nb = smp.state[:n] != _BASIC
    xs[nb & (smp.state[:n] == _AT_LB)] = lb[nb & (smp.state[:n] == _AT_LB)]
    xs[nb & (smp.state[:n] == _AT_UB)] = ub[nb & (smp.state[:n] == _AT_UB)]
    return LpSolution(OPTIMAL, xs, float(np.dot(c, xs)) + problem.offset, smp.iterations)


def _drive_out_artificials(smp: _Simplex, first_art: int) -> None:
    """Pivot zero-level artificials out of the basis where possible."""
    for r in range(smp.m):
        if smp.basis[r] < first_art:
            continue
        row = smp.B_inv[r] @ smp.A[:, :first_art]
        candidates = np.flatnonzero((np.abs(row) > 1e-7) & (smp.state[:first_art] != _BASIC))
        if len(candidates) == 0:
            continue
        j = int(candidates[np.argmax(np.abs(row[candidates]))])
        alpha = smp.B_inv @ smp.A[:, j]
        out = smp.basis[r]
        smp.state[out] = _AT_LB
        smp.x[out] = 0.0
        smp.state[j] = _BASIC
        smp.basis[r] = j
        pivot_row = smp.B_inv[r] / alpha[r]
        smp.B_inv -= np.outer(alpha, pivot_row)
        smp.B_inv[r] = pivot_row


# ---------------------------------------------------------------------------
# fixed-column MPS


def _num(value: float) -> str:
    """Most precise representation of ``value`` fitting in 12 columns."""
    if value == int(value) and abs(value) < 1e11:
        return str(int(value))
    for digits in range(12, 0, -1):
        s = f"{value:.{digits}g}"
        if len(s) <= 12:
            return s
    return f"{value:.5e}"


def _field_line(code: str, name: str, name2: str = "", num: str = "") -> str:
    line = f" {code:<2} {name:<8}"
    if name2 or num:
        line += f"  {name2:<8}  {num:>12}"
    return line.rstrip()


def export_standard(problem: LpProblem, name: str = "DRCCEMS") -> str:
    """Serialize ``problem`` as fixed-column MPS.

    Columns are renamed ``C0000001...`` and rows ``R0000001...`` to fit the
    eight-character name fields; the original names follow in ``*`` comment
    lines. Output is byte-identical for identical input.
    """
    cname = [f"C{j + 1:07d}" for j in range(problem.n_vars)]
    rname = [f"R{i + 1:07d}" for i in range(problem.n_rows)]
    out = [f"* {name}: {problem.n_vars} columns, {problem.n_rows} rows"]
    for j, nm in enumerate(problem.names):
        out.append(f"* {cname[j]} {nm}")
    for i, row in enumerate(problem.rows):
        if row.tag:
            out.append(f"* {rname[i]} {row.tag}")
    out.append(f"NAME          {name}")
    out.append("ROWS")
    out.append(" N  COST")
    code = {LE: "L", EQ: "E", GE: "G"}
    for i, row in enumerate(problem.rows):
        out.append(f" {code[row.sense]}  {rname[i]}")
    out.append("COLUMNS")
    by_col: list[list[tuple[str, float]]] = [[] for _ in range(problem.n_vars)]
    for i, row in enumerate(problem.rows):
        for j, a in zip(row.index.tolist(), row.value.tolist()):
            if a != 0.0:
                by_col[j].append((rname[i], a))
    for j in range(problem.n_vars):
        entries = []
        if problem.objective[j] != 0.0:
            entries.append(("COST", problem.objective[j]))
        entries.extend(by_col[j])
        if not entries:
            entries.append(("COST", 0.0))
        for rn, a in entries:
            out.append(_field_line("", cname[j], rn, _num(a)))
    out.append("RHS")
    if problem.offset != 0.0:
        # objective-row RHS is the negated constant
        out.append(_field_line("", "RHS", "COST", _num(-problem.offset)))
    for i, row in enumerate(problem.rows):
        if row.rhs != 0.0:
            out.append(_field_line("", "RHS", rname[i], _num(row.rhs)))
    out.append("BOUNDS")
    for j in range(problem.n_vars):
        lo, up = problem.lower[j], problem.upper[j]
        cn = cname[j]
        if lo == up:
            out.append(_field_line("FX", "BND", cn, _num(lo)))
        elif lo == -math.inf and up == math.inf:
            out.append(_field_line("FR", "BND", cn))
        else:
            if lo == -math.inf:
                out.append(_field_line("MI", "BND", cn))
            elif lo != 0.0:
                out.append(_field_line("LO", "BND", cn, _num(lo)))
            if up != math.inf:
                out.append(_field_line("UP", "BND", cn, _num(up)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def read_standard(text: str) -> LpProblem:
    """Parse MPS text written by :func:`export_standard` (whitespace-split)."""
    rel = {"L": LE, "E": EQ, "G": GE}
    section = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, dict[str, float]] = {}
    col_order: list[str] = []
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    obj_row = None
    for line in text.splitlines():
        if not line.strip() or line.startswith("*"):
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        parts = line.split()
        if section == "ROWS":
            kind, rn = parts
            if kind == "N":
                obj_row = rn
            else:
                row_sense[rn] = rel[kind]
                row_order.append(rn)
        elif section == "COLUMNS":
            cn = parts[0]
            if cn not in cols:
                cols[cn] = {}
                col_order.append(cn)
            for rn, v in zip(parts[1::2], parts[2::2]):
                cols[cn][rn] = float(v)
        elif section == "RHS":
            for rn, v in zip(parts[1::2], parts[2::2]):
                rhs[rn] = float(v)
        elif section == "BOUNDS":
            kind, cn = parts[0], parts[2]
            b = bounds.setdefault(cn, [0.0, math.inf])
            v = float(parts[3]) if len(parts) > 3 else 0.0
            if kind == "UP":
                b[1] = v
            elif kind == "LO":
                b[0] = v
            elif kind == "FX":
                b[0] = b[1] = v
            elif kind == "FR":
                b[0], b[1] = -math.inf, math.inf
            elif kind == "MI":
                b[0] = -math.inf
            elif kind == "PL":
                b[1] = math.inf
    prob = LpProblem()
    prob.offset = -rhs.get(obj_row, 0.0) if obj_row else 0.0
    for cn in col_order:
        lo, up = bounds.get(cn, [0.0, math.inf])
        prob.add_var(cn, lo, up, cols[cn].get(obj_row, 0.0))
    row_coeffs: dict[str, list[tuple[int, float]]] = {rn: [] for rn in row_order}
    for j, cn in enumerate(col_order):
        for rn, v in cols[cn].items():
            if rn != obj_row:
                row_coeffs[rn].append((j, v))
    for rn in row_order:
        prob.add_row(row_coeffs[rn], row_sense[rn], rhs.get(rn, 0.0), tag=rn)
    return prob
