"""Closed-form vacuum-detection probabilities for the Werner-like state.

Each party displaces its mode by a local-oscillator amplitude and records
whether an on-off detector stays dark.  Settings are plain Python complex
numbers; the mixing weight ``p`` is a float in ``[0, 1]``.
"""

from __future__ import annotations

import cmath
import math
from numbers import Number

from .errors import DomainError

#: Mixing weight at and below which the Werner-like state is separable.
SEPARABILITY_BOUND = 1.0 / 3.0


def as_setting(a) -> complex:
    """Coerce ``a`` to a finite complex amplitude.

    Accepts complex/real numbers and ``(re, im)`` pairs.
    """
    if isinstance(a, Number):
        z = complex(a)
    else:
        try:
            re, im = a
        except (TypeError, ValueError):
            raise DomainError(f"cannot interpret {a!r} as an amplitude") from None
        z = complex(float(re), float(im))
    if not cmath.isfinite(z):
        raise DomainError(f"amplitude must be finite, got {z!r}")
    return z


def check_p(p) -> float:
    """Validate a mixing weight and return it as a float."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"mixing parameter p must lie in [0, 1], got {p!r}")
    return p


def _joint(p: float, a: complex, b: complex) -> float:
    na, nb = abs(a) ** 2, abs(b) ** 2
    damp = math.exp(-na - nb)
    return 0.5 * p * damp * abs(a - b) ** 2 + 0.25 * (1.0 - p) * damp * (1.0 + na) * (1.0 + nb)


def _single(a: complex) -> float:
    n = abs(a) ** 2
    return 0.5 * math.exp(-n) * (1.0 + n)


def joint_probability(p, a, b) -> float:
    """Probability that neither detector clicks for settings ``a`` and ``b``.

    >>> round(joint_probability(1.0, 1, -1), 7)
    0.2706706
    """
    return _joint(check_p(p), as_setting(a), as_setting(b))


def single_probability(a) -> float:
    """Probability that a single detector stays dark.  Does not depend on p."""
    return _single(as_setting(a))


def click_probability(a) -> float:
    return 1.0 - single_probability(a)
