"""Box-clamped Nelder-Mead simplex search for Bell functionals, compiled with numba.

The objective is the signed distance of a quantum Bell functional beyond one
classical bound, negated for minimisation.  The functional is described by
plain arrays so a single compiled kernel serves every inequality:

* ``single_c[i]``: coefficient of the single vacuum probability of setting i;
* ``pair_i, pair_j, pair_c``: joint terms;
* ``params = (p, bound, sign)`` with ``sign = +1`` for an upper bound.

Each start runs independently, so results do not depend on how many starts
are requested together or in which order they are processed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class SearchResult:
    x: np.ndarray          # (m, d) best vertex per start
    fun: np.ndarray        # (m,) objective at x
    converged: np.ndarray  # (m,) tolerance reached within the budget
    nit: np.ndarray        # (m,) iterations used


@njit(cache=True)
def objective(x, gauge_fixed, single_c, pair_i, pair_j, pair_c, params):
    """Negated excess beyond one bound at the packed settings vector ``x``."""
    n = single_c.shape[0]
    re = np.empty(n)
    im = np.empty(n)
    if gauge_fixed:
        re[0] = x[0]
        im[0] = 0.0
        for k in range(1, n):
            re[k] = x[2 * k - 1]
            im[k] = x[2 * k]
    else:
        for k in range(n):
            re[k] = x[2 * k]
            im[k] = x[2 * k + 1]
    p = params[0]
    norm2 = re * re + im * im
    damp = np.exp(-norm2)
    total = 0.0
    for i in range(n):
        if single_c[i] != 0.0:
            total += single_c[i] * 0.5 * damp[i] * (1.0 + norm2[i])
    for t in range(pair_c.shape[0]):
        i = pair_i[t]
        j = pair_j[t]
        dr = re[i] - re[j]
        di = im[i] - im[j]
        total += pair_c[t] * damp[i] * damp[j] * (
            0.5 * p * (dr * dr + di * di) + 0.25 * (1.0 - p) * (1.0 + norm2[i]) * (1.0 + norm2[j])
        )
    return -params[2] * (total - params[1])


@njit(cache=True)
def _clip(x, lo, hi):
    out = x.copy()
    for k in range(x.shape[0]):
        if out[k] < lo[k]:
            out[k] = lo[k]
        elif out[k] > hi[k]:
            out[k] = hi[k]
    return out


@njit(cache=True)
def _nelder_mead(x0, lo, hi, step, max_iters, xatol, fatol, gauge_fixed, single_c, pair_i, pair_j, pair_c, params):
    d = x0.shape[0]
    sim = np.empty((d + 1, d))
    fsim = np.empty(d + 1)
    sim[0] = _clip(x0, lo, hi)
    for k in range(d):
        v = sim[0].copy()
        if v[k] + step[k] <= hi[k]:
            v[k] += step[k]
        else:
            v[k] -= step[k]
        sim[k + 1] = _clip(v, lo, hi)
    for k in range(d + 1):
        fsim[k] = objective(sim[k], gauge_fixed, single_c, pair_i, pair_j, pair_c, params)

    nit = 0
    converged = False
    while True:
        order = np.argsort(fsim, kind="mergesort")
        sim = sim[order]
        fsim = fsim[order]
        spread_x = 0.0
        spread_f = 0.0
        for k in range(1, d + 1):
            spread_f = max(spread_f, abs(fsim[k] - fsim[0]))
            for c in range(d):
                spread_x = max(spread_x, abs(sim[k, c] - sim[0, c]))
        if spread_x <= xatol and spread_f <= fatol:
            converged = True
            break
        if nit >= max_iters:
            break
        nit += 1

        xbar = sim[0].copy()
        for k in range(1, d):
            xbar += sim[k]
        xbar /= d
        worst = sim[d]

        xr = _clip(xbar + REFLECT * (xbar - worst), lo, hi)
        fr = objective(xr, gauge_fixed, single_c, pair_i, pair_j, pair_c, params)
        shrink = False
        if fr < fsim[0]:
            xe = _clip(xbar + REFLECT * EXPAND * (xbar - worst), lo, hi)
            fe = objective(xe, gauge_fixed, single_c, pair_i, pair_j, pair_c, params)
            if fe < fr:
                sim[d] = xe
                fsim[d] = fe
            else:
                sim[d] = xr
                fsim[d] = fr
        elif fr < fsim[d - 1]:
            sim[d] = xr
            fsim[d] = fr
        elif fr < fsim[d]:
            xc = _clip(xbar + CONTRACT * REFLECT * (xbar - worst), lo, hi)
            fc = objective(xc, gauge_fixed, single_c, pair_i, pair_j, pair_c, params)
            if fc <= fr:
                sim[d] = xc
                fsim[d] = fc
            else:
                shrink = True
        else:
            xcc = _clip(xbar - CONTRACT * (xbar - worst), lo, hi)
            fcc = objective(xcc, gauge_fixed, single_c, pair_i, pair_j, pair_c, params)
            if fcc < fsim[d]:
                sim[d] = xcc
                fsim[d] = fcc
            else:
                shrink = True
        if shrink:
            for k in range(1, d + 1):
                sim[k] = sim[0] + SHRINK * (sim[k] - sim[0])
                fsim[k] = objective(sim[k], gauge_fixed, single_c, pair_i, pair_j, pair_c, params)
    return sim[0].copy(), fsim[0], converged, nit


@njit(cache=True)
def _minimize_many(x0, lo, hi, step, max_iters, xatol, fatol, gauge_fixed, single_c, pair_i, pair_j, pair_c, params):
    m, d = x0.shape
    xs = np.empty((m, d))
    fs = np.empty(m)
    conv = np.zeros(m, dtype=np.bool_)
    nits = np.zeros(m, dtype=np.int64)
    for r in range(m):
        x, f, c, it = _nelder_mead(
            x0[r], lo, hi, step, max_iters[r], xatol, fatol, gauge_fixed, single_c, pair_i, pair_j, pair_c, params
        )
        xs[r] = x
        fs[r] = f
        conv[r] = c
        nits[r] = it
    return xs, fs, conv, nits


@dataclass(frozen=True)
class Functional:
    """Array form of one facet of a Bell inequality at fixed ``p``."""

    single_c: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_c: np.ndarray
    params: np.ndarray
    gauge_fixed: bool = True

    def __call__(self, x) -> float:
        return float(
            objective(np.asarray(x, dtype=float), self.gauge_fixed, self.single_c,
                      self.pair_i, self.pair_j, self.pair_c, self.params)
        )


def minimize_many(fun: Functional, x0, lo, hi, *, step, max_iters, xatol, fatol) -> SearchResult:
    """Run one Nelder-Mead search per row of ``x0`` inside the box ``[lo, hi]``.

    ``step`` sets the initial simplex edge per coordinate; ``max_iters`` may
    be a scalar or one cap per row.  Proposals leaving the box are clamped
    coordinate-wise.
    """
    x0 = np.ascontiguousarray(np.atleast_2d(x0), dtype=float)
    caps = np.broadcast_to(np.asarray(max_iters, dtype=np.int64), (x0.shape[0],)).copy()
    xs, fs, conv, nits = _minimize_many(
        x0, np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), np.asarray(step, dtype=float),
        caps, float(xatol), float(fatol), fun.gauge_fixed,
        fun.single_c, fun.pair_i, fun.pair_j, fun.pair_c, fun.params,
    )
    return SearchResult(xs, fs, conv, nits)
