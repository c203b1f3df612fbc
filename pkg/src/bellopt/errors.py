class DomainError(ValueError):
    """An input lies outside the domain of a model function."""


class TruncationError(DomainError):
    """The Fock-space cutoff is too small for the requested amplitudes."""


class NoViolationError(RuntimeError):
    """The inequality is not violated even at p = 1."""
