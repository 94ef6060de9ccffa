"""Exception hierarchy shared by all modules."""


class NVCSError(Exception):
    """Base class for library errors."""


class DomainError(NVCSError, ValueError):
    """Parameters violate a stated invariant."""


class SingularityError(NVCSError, ArithmeticError):
    """A square root or quotient became singular."""


class ZeroFactorialError(SingularityError):
    """Some basic number {m} vanished inside a factorial product."""


class DivergenceError(NVCSError, ArithmeticError):
    """An infinite product or series cannot converge for these parameters."""


class ConvergenceError(NVCSError, ArithmeticError):
    """A series or quadrature did not reach its tolerance within the cap."""


class DegenerateLevelError(NVCSError, ArithmeticError):
    """Mixing angles requested for a level with Q = 0."""


class RadiusError(NVCSError, ValueError):
    """Label lies outside the open disc of convergence."""


class BasisMismatchError(NVCSError, ValueError):
    """Operators expressed in different bases were combined."""


class ConfigError(NVCSError, ValueError):
    """Malformed or incompatible experiment configuration."""


class CacheSchemaError(NVCSError, ValueError):
    """A cached file has an incompatible schema version."""
