"""Truncated two-mode Fock-space oracle for the vacuum probabilities.

Everything here is built from number-state amplitudes and dense linear
algebra, with no use of the closed forms in :mod:`bellopt.analytic`, so
that the two can be checked against each other.
"""

from __future__ import annotations

import math

import numpy as np

from .analytic import as_setting, check_p
from .errors import DomainError, TruncationError

DEFAULT_TRUNCATION = 32
#: Largest neglected coherent-state weight the oracle accepts.
MAX_TAIL = 1e-10


def _check_truncation(N) -> int:
    if int(N) != N or N < 1:
        raise DomainError(f"truncation must be a positive integer, got {N!r}")
    return int(N)


def coherent_state_vector(a, N: int = DEFAULT_TRUNCATION) -> np.ndarray:
    """Number-state amplitudes of the coherent state ``|a>`` up to ``|N>``."""
    N = _check_truncation(N)
    a = as_setting(a)
    c = np.empty(N + 1, dtype=complex)
    c[0] = math.exp(-0.5 * abs(a) ** 2)
    for n in range(1, N + 1):
        c[n] = c[n - 1] * a / math.sqrt(n)
    return c


def truncation_tail_bound(a, N: int) -> float:
    """Weight of ``|a>`` on number states above ``N``, clamped to ``[0, 1]``.

    The tail of the Poisson distribution is summed directly, which avoids the
    cancellation in ``1 - sum(head)`` when the tail is tiny.
    """
    N = _check_truncation(N)
    lam = abs(as_setting(a)) ** 2
    if lam == 0.0:
        return 0.0
    head_term = math.exp(-lam + (N + 1) * math.log(lam) - math.lgamma(N + 2))
    if lam < N / 2:
        tail, term, n = 0.0, head_term, N + 1
        while term > 1e-300 and term > 1e-18 * tail:
            tail += term
            n += 1
            term *= lam / n
        return min(max(tail, 0.0), 1.0)
    head = sum(math.exp(-lam + n * math.log(lam) - math.lgamma(n + 1)) for n in range(N + 1))
    return min(max(1.0 - head, 0.0), 1.0)


def _index(na: int, nb: int, N: int) -> int:
    return na * (N + 1) + nb


def werner_density_matrix(p, N: int = DEFAULT_TRUNCATION) -> np.ndarray:
    """Werner-like state embedded in the ``(N+1)**2``-dimensional two-mode space.

    Rows and columns are ordered by ``na * (N + 1) + nb``.
    """
    p = check_p(p)
    N = _check_truncation(N)
    dim = (N + 1) ** 2
    psi = np.zeros(dim, dtype=complex)
    psi[_index(1, 0, N)] = 1 / math.sqrt(2)
    psi[_index(0, 1, N)] = -1 / math.sqrt(2)
    rho = p * np.outer(psi, psi.conj())
    for na in (0, 1):
        for nb in (0, 1):
            k = _index(na, nb, N)
            rho[k, k] += (1.0 - p) / 4.0
    return rho


def _require_tail(N: int, *amps: complex) -> None:
    for a in amps:
        tail = truncation_tail_bound(a, N)
        if tail > MAX_TAIL:
            raise TruncationError(
                f"truncation N={N} neglects weight {tail:.3g} of amplitude {a!r} "
                f"(limit {MAX_TAIL:g}); increase the truncation"
            )


def joint_vacuum_probability_oracle(p, a, b, N: int = DEFAULT_TRUNCATION) -> float:
    """``<a, b| rho |a, b>`` evaluated in the truncated space."""
    N = _check_truncation(N)
    a, b = as_setting(a), as_setting(b)
    _require_tail(N, a, b)
    rho = werner_density_matrix(p, N)
    v = np.kron(coherent_state_vector(a, N), coherent_state_vector(b, N))
    return float(np.real(v.conj() @ rho @ v))


def reduced_density_matrix(rho: np.ndarray, N: int) -> np.ndarray:
    """Partial trace over mode b."""
    d = N + 1
    return np.einsum("ikjk->ij", rho.reshape(d, d, d, d))


def single_vacuum_probability_oracle(p, a, N: int = DEFAULT_TRUNCATION) -> float:
    """``<a| Tr_b(rho) |a>`` evaluated in the truncated space."""
    N = _check_truncation(N)
    a = as_setting(a)
    _require_tail(N, a)
    rho_a = reduced_density_matrix(werner_density_matrix(p, N), N)
    v = coherent_state_vector(a, N)
    return float(np.real(v.conj() @ rho_a @ v))
