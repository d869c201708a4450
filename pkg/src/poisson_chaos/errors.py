"""Semantic exception hierarchy shared across the package."""

from __future__ import annotations


class PoissonChaosError(Exception):
    """Base class for all errors raised by this package."""


class EnvelopeMissingError(PoissonChaosError, ValueError):
    """A rigorous (declared-envelope) expectation was requested for a
    functional that carries no growth envelope."""


class EnvelopeViolationError(PoissonChaosError, ValueError):
    """A functional value exceeded its declared growth envelope on the
    truncation lattice."""


class NonFiniteValueError(PoissonChaosError, FloatingPointError):
    """A functional evaluated to NaN or +-inf inside an expectation."""


class TruncationError(PoissonChaosError, RuntimeError):
    """Adaptive cap extension failed to stabilise within the round limit."""


class SiteRangeError(PoissonChaosError, IndexError):
    """A site index fell outside 0..k-1."""


class DslError(PoissonChaosError, ValueError):
    """Base class for expression-language errors."""


class DslSyntaxError(DslError):
    """Malformed expression source; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DslEvaluationError(DslError):
    """Runtime evaluation failure (e.g. division by zero); never a silent NaN."""


class PartitionMismatchError(PoissonChaosError, ValueError):
    """Two functionals do not share a common monotone partition."""


class MonotonicityError(PoissonChaosError, ValueError):
    """Declared monotonicity fails on the lattice; carries a witness."""

    def __init__(self, message: str, witness: tuple[int, ...], site: int):
        super().__init__(f"{message} (witness counts={witness}, site={site})")
        self.witness = witness
        self.site = site


class ConfigError(PoissonChaosError, ValueError):
    """Invalid experiment configuration; carries the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
