"""Wasserstein ambiguity-set statistics for the PV samples.

Radius of the ball around the empirical distribution, estimation of the
concentration constant ``C`` from exponential moments, dual norms, and an
exact 1-D Wasserstein distance used for validation.

Note on the radius: the confidence term is ``ln(1/(1-beta))``, so the ball
shrinks to zero as ``beta -> 0``. Standard concentration bounds use
``ln(1/beta)`` instead; the form here is kept deliberately and documented in
the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import DomainError, PvSampleSet

NORMS = ("one", "two", "inf")

DEFAULT_ETA_GRID = np.logspace(-4, 1, 400)

# samples arrive in kW; C is estimated on MW-scaled deviations
KW_TO_MW = 1e-3


@dataclass(frozen=True)
class AmbiguitySpec:
    """Wasserstein ball parameters.

    ``kw_per_unit`` converts the radius (in the unit ``C`` was estimated in,
    MW by default) to kW for buffering PV constraints.
    """

    constant_c: float = 1.36
    confidence_beta: float = 0.05
    risk_alpha: float = 0.05
    norm_kind: str = "inf"
    n_samples: int = 1
    kw_per_unit: float = 1000.0

    def __post_init__(self):
        if self.constant_c < 0:
            raise DomainError(f"constant_c must be >= 0, got {self.constant_c}")
        if not 0 < self.confidence_beta < 1:
            raise DomainError(f"beta must lie in (0, 1), got {self.confidence_beta}")
        if not 0 < self.risk_alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.risk_alpha}")
        if self.norm_kind not in NORMS:
            raise DomainError(f"norm_kind must be one of {NORMS}, got {self.norm_kind!r}")
        if self.n_samples < 1:
            raise DomainError("n_samples must be >= 1")

    @property
    def radius(self) -> float:
        return radius(self.constant_c, self.n_samples, self.confidence_beta)

    @property
    def effective_radius(self) -> float:
        return self.radius / self.risk_alpha

    @property
    def effective_radius_kw(self) -> float:
        return self.effective_radius * self.kw_per_unit


def radius(c: float, n: int, beta: float) -> float:
    """``c * sqrt(ln(1/(1-beta)) / n)``."""
    if not 0 < beta < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if c < 0:
        raise DomainError(f"c must be >= 0, got {c}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return c * math.sqrt(math.log(1.0 / (1.0 - beta)) / n)


def sample_norm(vectors: np.ndarray, norm_kind: str) -> np.ndarray:
    """Row-wise primal norm."""
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    if norm_kind == "one":
        return np.abs(v).sum(axis=1)
    if norm_kind == "two":
        return np.sqrt((v * v).sum(axis=1))
    if norm_kind == "inf":
        return np.abs(v).max(axis=1)
    raise DomainError(f"unknown norm {norm_kind!r}")


def dual_norm(vector: Sequence[float], norm_kind: str) -> float:
    """Dual of the sample-space norm: one <-> inf, two self-dual."""
    dual = {"one": "inf", "inf": "one", "two": "two"}.get(norm_kind)
    if dual is None:
        raise DomainError(f"unknown norm {norm_kind!r}")
    v = np.asarray(vector, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    return float(sample_norm(v, dual)[0])


def c_value(squared_devs: np.ndarray, eta: float) -> float:
    """``2*sqrt((1 + ln mean exp(eta*d^2)) / (2*eta))`` for squared deviations d^2."""
    if eta <= 0:
        raise DomainError(f"eta must be > 0, got {eta}")
    d2 = np.asarray(squared_devs, dtype=float)
    log_mean = float(logsumexp(eta * d2) - math.log(d2.size))
    return 2.0 * math.sqrt((1.0 + log_mean) / (2.0 * eta))


def squared_deviations(samples, norm_kind: str = "inf", scale: float = KW_TO_MW) -> np.ndarray:
    xi = samples.samples if isinstance(samples, PvSampleSet) else np.atleast_2d(
        np.asarray(samples, dtype=float))
    xi = xi * scale
    mu = xi.mean(axis=0)
    return sample_norm(xi - mu, norm_kind) ** 2


@dataclass(frozen=True)
class CEstimate:
    c: float
    eta_star: float
    curve: np.ndarray  # shape (k, 2): eta, c_value

    def curve_rows(self) -> list[tuple[float, float]]:
        return [(float(e), float(v)) for e, v in self.curve]


def estimate_c(samples, eta_grid=None, norm_kind: str = "inf",
               scale: float = KW_TO_MW, refine: bool = True) -> CEstimate:
    """Minimize the empirical exponential-moment bound on ``C`` over ``eta``.

    The grid minimum is refined by golden-section search in ``log(eta)``
    between its grid neighbours. ``scale`` rescales samples before the
    deviations are taken (kW to MW by default); pass 1.0 for raw units.
    """
    grid = DEFAULT_ETA_GRID if eta_grid is None else np.asarray(eta_grid, dtype=float)
    if grid.size == 0:
        raise DomainError("eta grid is empty")
    if np.any(grid <= 0):
        raise DomainError("eta grid entries must be > 0")
    d2 = squared_deviations(samples, norm_kind, scale)
    grid = np.sort(grid)
    values = np.array([c_value(d2, e) for e in grid])
    k = int(np.argmin(values))
    best_eta, best_c = float(grid[k]), float(values[k])
    if refine and 0 < k < grid.size - 1:
        f = lambda u: c_value(d2, math.exp(u))
        u = _golden_section(f, math.log(grid[k - 1]), math.log(grid[k + 1]))
        cu = f(u)
        if cu < best_c:
            best_eta, best_c = math.exp(u), cu
    return CEstimate(best_c, best_eta, np.column_stack([grid, values]))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, a: float, b: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def wasserstein_1d(p_samples: Sequence[float], q_samples: Sequence[float]) -> float:
    """Exact W1 between two equal-size uniform empirical distributions."""
    p = np.sort(np.asarray(p_samples, dtype=float).ravel())
    q = np.sort(np.asarray(q_samples, dtype=float).ravel())
    if p.size != q.size:
        raise DomainError(f"sample counts differ: {p.size} vs {q.size}")
    if p.size == 0:
        raise DomainError("need at least one sample")
    return float(np.mean(np.abs(p - q)))
