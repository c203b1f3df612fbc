"""Multi-start Nelder-Mead search for maximal violation, p sweeps, thresholds.

The search variable for an ``n``-setting inequality is a real vector of
length ``2n - 1``: the first amplitude is taken real and non-negative (the
probabilities are invariant under a common phase rotation of all
settings), the remaining ``n - 1`` contribute real and imaginary parts.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import analytic, neldermead
from . import inequalities as ineqs
from .errors import DomainError, NoViolationError
from .inequalities import BellInequality

DEFAULT_SEED = 42
# Local searches are restarted from their own optimum at most this often.
_MAX_RESTARTS = 4
# Initial simplex edge as a fraction of the box width; restarts use the smaller one.
INITIAL_STEP = 0.05
POLISH_STEP = 1e-3


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 64
    radius: float = 3.0
    start_radius: float = 1.0
    tol_value: float = 1e-9
    tol_p: float = 1e-3
    max_iters: int = 2000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if int(self.starts) != self.starts or self.starts < 1:
            raise DomainError(f"starts must be a positive integer, got {self.starts!r}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"radius must be positive, got {self.radius!r}")
        if not (math.isfinite(self.start_radius) and 0 < self.start_radius <= self.radius):
            raise DomainError(f"start_radius must lie in (0, radius], got {self.start_radius!r}")
        for name in ("tol_value", "tol_p"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise DomainError(f"{name} must be positive, got {val!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise DomainError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class OptimizationResult:
    settings: tuple
    value: float
    excess: float
    facet: str
    starts_converged: int
    p: float = float("nan")


@dataclass(frozen=True)
class ThresholdResult:
    p_star: float
    bracket: tuple
    evidence: OptimizationResult
    probes: tuple = ()


# -- parametrisation -------------------------------------------------------

def _decode(x: Sequence[float], gauge_fixed: bool = True) -> list:
    if gauge_fixed:
        out = [complex(x[0], 0.0)]
        rest = x[1:]
    else:
        out = []
        rest = x
    out.extend(complex(rest[k], rest[k + 1]) for k in range(0, len(rest), 2))
    return out


def _encode(settings: Sequence[complex], radius: float) -> np.ndarray:
    """Rotate settings into the gauge (first amplitude real, >= 0) and clip to the box."""
    settings = [analytic.as_setting(s) for s in settings]
    phase = cmath.exp(-1j * cmath.phase(settings[0])) if settings[0] != 0 else 1.0
    rot = [s * phase for s in settings]
    x = [abs(rot[0])]
    for s in rot[1:]:
        x.extend((s.real, s.imag))
    x = np.clip(np.array(x, dtype=float), -radius, radius)
    x[0] = max(x[0], 0.0)
    return x


def _box(n: int, radius: float, gauge_fixed: bool = True) -> list:
    dim = 2 * n - 1 if gauge_fixed else 2 * n
    bounds = [(-radius, radius)] * dim
    if gauge_fixed:
        bounds[0] = (0.0, radius)
    return bounds


def start_points(n: int, cfg: OptimizerConfig) -> np.ndarray:
    """Seeded uniform start points in the gauge-fixed box of half-width ``start_radius``.

    Starts are drawn from an inner box because the probabilities decay like
    ``exp(-|a|**2)``: far out the objective is flat to ~1e-7 and simplex
    searches started there stall on the plateau.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = np.array(_box(n, cfg.start_radius)).T
    return rng.uniform(lo, hi, size=(cfg.starts, len(lo)))


# -- objective -------------------------------------------------------------

def _facet_objective(ineq: BellInequality, p: float, facet: str, gauge_fixed: bool = True) -> neldermead.Functional:
    """``f(x) = -(distance beyond the given bound)`` at packed settings ``x``."""
    pairs = list(ineq.pairs())
    return neldermead.Functional(
        single_c=np.array([float(c) for c in ineq.single_coeffs]),
        pair_i=np.array([i for i, _, _ in pairs], dtype=np.int64),
        pair_j=np.array([j for _, j, _ in pairs], dtype=np.int64),
        pair_c=np.array([float(c) for _, _, c in pairs]),
        params=np.array([p, float(ineq.bounds[facet]), 1.0 if facet == "upper" else -1.0]),
        gauge_fixed=gauge_fixed,
    )


def _local_search(fun, x0, bounds, cfg: OptimizerConfig):
    """Nelder-Mead from every row of ``x0``, restarted from each row's optimum until it stalls.

    Returns ``(x, fun(x), converged)`` arrays; every row is independent of
    the others.
    """
    lo, hi = np.array(bounds, dtype=float).T
    x = np.clip(np.atleast_2d(np.asarray(x0, dtype=float)), lo, hi)
    fx = np.array([fun(row) for row in x])
    budget = np.full(len(x), cfg.max_iters, dtype=np.int64)
    converged = np.zeros(len(x), dtype=bool)
    pending = np.arange(len(x))
    step = INITIAL_STEP * (hi - lo)
    for attempt in range(_MAX_RESTARTS + 1):
        pending = pending[budget[pending] > 0]
        if pending.size == 0:
            break
        res = neldermead.minimize_many(
            fun, x[pending], lo, hi,
            step=step if attempt == 0 else POLISH_STEP * (hi - lo),
            max_iters=budget[pending],
            xatol=0.1 * math.sqrt(cfg.tol_value),
            fatol=0.1 * cfg.tol_value,
        )
        budget[pending] -= res.nit
        gain = fx[pending] - res.fun
        better = res.fun <= fx[pending]
        x[pending[better]] = res.x[better]
        fx[pending[better]] = res.fun[better]
        converged[pending] = res.converged
        pending = pending[(gain >= cfg.tol_value) & res.converged]
    return x, fx, converged


def _rank_key(candidate):
    x, exc, _ok, _facet = candidate
    return (-exc, x)


def optimize_settings(
    ineq: BellInequality,
    p,
    cfg: Optional[OptimizerConfig] = None,
    warm_starts: Sequence[Sequence[complex]] = (),
) -> OptimizationResult:
    """Maximise the violation excess of ``ineq`` at mixing weight ``p``.

    Every declared bound is targeted separately from the same start set
    (seeded box draws plus any ``warm_starts``) and the overall best excess
    is returned.  Starts are independent, so the outcome does not depend on
    the order in which they run.
    """
    cfg = cfg or OptimizerConfig()
    p = analytic.check_p(p)
    starts = list(start_points(ineq.n, cfg))
    for w in warm_starts:
        if len(w) != ineq.n:
            raise DomainError(f"warm start has {len(w)} settings, {ineq.name} needs {ineq.n}")
        starts.append(_encode(w, cfg.radius))

    starts = np.array(starts)
    bounds = _box(ineq.n, cfg.radius)
    candidates = []
    for facet in ineq.bounds:
        fun = _facet_objective(ineq, p, facet)
        x, fx, ok = _local_search(fun, starts, bounds, cfg)
        candidates.extend((tuple(map(float, xi)), -float(fi), bool(oi), facet) for xi, fi, oi in zip(x, fx, ok))

    best_x, _, _, _ = min(candidates, key=_rank_key)
    settings = tuple(_decode(best_x))
    value = ineqs.evaluate(ineq, p, settings)
    distances = ineqs.bound_distances(ineq, value)
    facet = max(distances, key=distances.get)
    return OptimizationResult(
        settings=settings,
        value=value,
        excess=distances[facet],
        facet=facet,
        starts_converged=sum(1 for c in candidates if c[2]),
        p=p,
    )


def refine(
    ineq: BellInequality,
    p,
    settings: Sequence[complex],
    cfg: Optional[OptimizerConfig] = None,
    gauge_fixed: bool = False,
) -> OptimizationResult:
    """Single local search from ``settings``; by default with the phase gauge lifted."""
    cfg = cfg or OptimizerConfig()
    p = analytic.check_p(p)
    value = ineqs.evaluate(ineq, p, settings)
    distances = ineqs.bound_distances(ineq, value)
    facet = max(distances, key=distances.get)
    if gauge_fixed:
        x0 = _encode(settings, cfg.radius)
    else:
        x0 = np.array([c for s in settings for c in (s.real, s.imag)], dtype=float)
    fun = _facet_objective(ineq, p, facet, gauge_fixed=gauge_fixed)
    x, _, ok = _local_search(fun, x0[None, :], _box(ineq.n, cfg.radius, gauge_fixed), cfg)
    new = tuple(_decode(x[0], gauge_fixed))
    value = ineqs.evaluate(ineq, p, new)
    distances = ineqs.bound_distances(ineq, value)
    facet = max(distances, key=distances.get)
    return OptimizationResult(new, value, distances[facet], facet, int(ok[0]), p)


def sweep(ineq: BellInequality, p_grid: Sequence[float], cfg: Optional[OptimizerConfig] = None) -> list:
    """Optimise at each grid point, warm-starting from the previous optimum."""
    cfg = cfg or OptimizerConfig()
    grid = [analytic.check_p(p) for p in p_grid]
    out = []
    prev = None
    for p in grid:
        res = optimize_settings(ineq, p, cfg, warm_starts=[prev.settings] if prev else ())
        out.append((p, res))
        prev = res
    return out


def find_threshold(ineq: BellInequality, cfg: Optional[OptimizerConfig] = None) -> ThresholdResult:
    """Bisect for the smallest p at which the optimised excess turns positive.

    For fixed settings the value is affine in p, so the optimised excess is
    convex in p and has a single upward zero crossing once
    ``excess(0) <= 0 < excess(1)``.
    """
    cfg = cfg or OptimizerConfig()
    top = optimize_settings(ineq, 1.0, cfg)
    if top.excess <= 0:
        raise NoViolationError(f"{ineq.name} is not violated at p = 1 (best excess {top.excess:.3g})")
    bottom = optimize_settings(ineq, 0.0, cfg, warm_starts=[top.settings])
    if bottom.excess > 0:
        raise DomainError(f"{ineq.name} is already violated at p = 0; no threshold bracket")

    lo, hi, evidence = 0.0, 1.0, top
    probes = [(0.0, bottom.excess), (1.0, top.excess)]
    while hi - lo > cfg.tol_p:
        mid = 0.5 * (lo + hi)
        res = optimize_settings(ineq, mid, cfg, warm_starts=[evidence.settings])
        if res.excess < ineqs.excess(ineq, mid, evidence.settings):
            res = optimize_settings(ineq, mid, replace(cfg, starts=2 * cfg.starts), warm_starts=[evidence.settings])
        probes.append((mid, res.excess))
        if res.excess > 0:
            hi, evidence = mid, res
        else:
            lo = mid
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), evidence, tuple(probes))
