"""Bell-type inequalities over single and pairwise joint probabilities.

An inequality is a linear functional

    sum_i c_i * Q(s_i) + sum_{i<j} c_ij * Q(s_i, s_j)

with classical bounds.  Coefficients are exact rationals so that validity
on the deterministic (local hidden variable) vertices can be checked
without rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import analytic
from .errors import DomainError

MAX_VERTEX_SETTINGS = 20


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class BellInequality:
    """Immutable inequality ``lower_bound <= value <= upper_bound``.

    ``joint_coeffs`` is a symmetric ``n x n`` table with a zero diagonal;
    entry ``[i][j]`` is the coefficient of ``Q(s_i, s_j)``, counted once
    per unordered pair.
    """

    name: str
    single_coeffs: tuple
    joint_coeffs: tuple
    lower_bound: Optional[Fraction] = None
    upper_bound: Optional[Fraction] = None
    description: str = field(default="", compare=False)

    def __post_init__(self):
        singles = tuple(_frac(c) for c in self.single_coeffs)
        joints = tuple(tuple(_frac(c) for c in row) for row in self.joint_coeffs)
        n = len(singles)
        if n < 2:
            raise DomainError("an inequality needs at least two settings")
        if len(joints) != n or any(len(row) != n for row in joints):
            raise DomainError("joint_coeffs must be an n x n table")
        for i in range(n):
            if joints[i][i] != 0:
                raise DomainError("joint_coeffs must have a zero diagonal")
            for j in range(i):
                if joints[i][j] != joints[j][i]:
                    raise DomainError("joint_coeffs must be symmetric")
        if self.lower_bound is None and self.upper_bound is None:
            raise DomainError("at least one bound is required")
        object.__setattr__(self, "single_coeffs", singles)
        object.__setattr__(self, "joint_coeffs", joints)
        for attr in ("lower_bound", "upper_bound"):
            val = getattr(self, attr)
            if val is not None:
                object.__setattr__(self, attr, _frac(val))

    @property
    def n(self) -> int:
        return len(self.single_coeffs)

    @property
    def bounds(self) -> dict:
        """Declared bounds keyed by ``"lower"`` / ``"upper"``."""
        out = {}
        if self.lower_bound is not None:
            out["lower"] = self.lower_bound
        if self.upper_bound is not None:
            out["upper"] = self.upper_bound
        return out

    def pairs(self):
        """Yield ``(i, j, coeff)`` for the nonzero joint terms with ``i < j``."""
        for i in range(self.n):
            for j in range(i + 1, self.n):
                c = self.joint_coeffs[i][j]
                if c:
                    yield i, j, c

    def permuted(self, perm: Sequence[int]) -> "BellInequality":
        """The inequality acting on settings reordered so that new slot k holds old slot perm[k]."""
        singles = [self.single_coeffs[perm[k]] for k in range(self.n)]
        joints = [[self.joint_coeffs[perm[k]][perm[m]] for m in range(self.n)] for k in range(self.n)]
        return BellInequality(self.name, singles, joints, self.lower_bound, self.upper_bound, self.description)

    def with_bounds(self, lower=None, upper=None) -> "BellInequality":
        return BellInequality(self.name, self.single_coeffs, self.joint_coeffs, lower, upper, self.description)


def _table(n: int, entries: dict) -> list:
    t = [[0] * n for _ in range(n)]
    for (i, j), c in entries.items():
        t[i][j] = t[j][i] = c
    return t


def _all_pairs(n: int, c) -> dict:
    return {(i, j): c for i in range(n) for j in range(i + 1, n)}


def _validated(ineq: BellInequality) -> BellInequality:
    verdict = verify_lhv_bounds(ineq)
    if not verdict.holds:
        raise AssertionError(f"built-in {ineq.name} fails at vertex {verdict.violated_at}")
    return ineq


def ch() -> BellInequality:
    """Clauser-Horne, settings ordered ``(alpha, alpha', beta, beta')``."""
    a, a2, b, b2 = range(4)
    joints = _table(4, {(a, b): 1, (a, b2): -1, (a2, b): 1, (a2, b2): 1})
    return _validated(BellInequality("ch", (0, -1, -1, 0), joints, -1, 0, "Clauser-Horne"))


def wigner_w1() -> BellInequality:
    return _validated(BellInequality("w1", (1, 1, 1), _table(3, _all_pairs(3, -1)), None, 1, "Bell-Wigner W1"))


# Janssens inequalities on events (i, j, k, l) -> settings (0, 1, 2, 3).
_JANSSENS = {
    1: ((1, 1, 0, 0), {(0, 1): 1, (0, 2): -1, (0, 3): -1, (1, 3): -1, (1, 2): -1, (2, 3): 1}, 0, None),
    2: ((1, 1, 1, 1), _all_pairs(4, -1), None, 1),
    3: ((2, 2, 2, 2), _all_pairs(4, -1), None, 3),
    4: ((1, 0, 0, 0), {(0, 1): -1, (0, 2): -1, (0, 3): -1, (1, 2): 1, (1, 3): 1, (2, 3): 1}, 0, None),
    5: ((1, 1, 1, -2), {(0, 1): -1, (0, 2): -1, (0, 3): 1, (1, 2): -1, (1, 3): 1, (2, 3): 1}, None, 1),
}


def janssens(k: int) -> BellInequality:
    """Janssens inequality ``J_k`` on four settings, ``k`` in 1..5."""
    if k not in _JANSSENS:
        raise DomainError(f"Janssens index must be in 1..5, got {k!r}")
    singles, pairs, lo, hi = _JANSSENS[k]
    return _validated(BellInequality(f"j{k}", singles, _table(4, pairs), lo, hi, f"Janssens J{k}"))


BUILTIN_NAMES = ("ch", "w1", "j1", "j2", "j3", "j4", "j5")


def get(name: str) -> BellInequality:
    """Look up a built-in inequality by its CLI name."""
    if name == "ch":
        return ch()
    if name == "w1":
        return wigner_w1()
    if len(name) == 2 and name[0] == "j" and name[1] in "12345":
        return janssens(int(name[1]))
    raise DomainError(f"unknown inequality {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def builtins() -> list:
    return [get(name) for name in BUILTIN_NAMES]


def _check_settings(ineq: BellInequality, settings) -> list:
    settings = [analytic.as_setting(s) for s in settings]
    if len(settings) != ineq.n:
        raise DomainError(f"{ineq.name} takes {ineq.n} settings, got {len(settings)}")
    return settings


def evaluate(ineq: BellInequality, p, settings) -> float:
    """Quantum value of the inequality's functional at mixing weight ``p``."""
    p = analytic.check_p(p)
    s = _check_settings(ineq, settings)
    total = 0.0
    for c, a in zip(ineq.single_coeffs, s):
        if c:
            total += float(c) * analytic.single_probability(a)
    for i, j, c in ineq.pairs():
        total += float(c) * analytic.joint_probability(p, s[i], s[j])
    return total


def bound_distances(ineq: BellInequality, value: float) -> dict:
    """Signed excess over each declared bound; positive means violated."""
    out = {}
    if ineq.lower_bound is not None:
        out["lower"] = float(ineq.lower_bound) - value
    if ineq.upper_bound is not None:
        out["upper"] = value - float(ineq.upper_bound)
    return out


def excess(ineq: BellInequality, p, settings) -> float:
    """Signed violation: positive iff some classical bound is exceeded."""
    return max(bound_distances(ineq, evaluate(ineq, p, settings)).values())


@dataclass(frozen=True)
class LHVVerdict:
    """Outcome of checking an inequality on every deterministic vertex."""

    name: str
    holds: bool
    violated_at: Optional[tuple]
    attaining: dict
    min_value: Fraction
    max_value: Fraction

    @property
    def tight(self) -> bool:
        """Every declared bound is attained by some vertex."""
        return all(self.attaining.values())


def vertex_value(ineq: BellInequality, t: Sequence[int]) -> Fraction:
    """Exact value at a deterministic assignment (joints are products of singles)."""
    total = sum((c * t[i] for i, c in enumerate(ineq.single_coeffs)), Fraction(0))
    for i, j, c in ineq.pairs():
        total += c * t[i] * t[j]
    return total


def verify_lhv_bounds(ineq: BellInequality) -> LHVVerdict:
    """Check the bounds at all ``2**n`` vertices with exact arithmetic.

    Vertices are scanned from all-ones downwards; the first violating one is
    reported.
    """
    if ineq.n > MAX_VERTEX_SETTINGS:
        raise DomainError(f"vertex enumeration is limited to n <= {MAX_VERTEX_SETTINGS}, got {ineq.n}")
    bounds = ineq.bounds
    attaining = {k: [] for k in bounds}
    violated_at = None
    lo = hi = None
    for t in itertools.product((1, 0), repeat=ineq.n):
        v = vertex_value(ineq, t)
        lo = v if lo is None else min(lo, v)
        hi = v if hi is None else max(hi, v)
        for k, b in bounds.items():
            if v == b:
                attaining[k].append(t)
        if violated_at is None:
            if ("lower" in bounds and v < bounds["lower"]) or ("upper" in bounds and v > bounds["upper"]):
                violated_at = t
    return LHVVerdict(ineq.name, violated_at is None, violated_at, attaining, lo, hi)
