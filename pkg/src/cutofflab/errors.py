"""Exception hierarchy shared by all cutofflab modules."""


class CutoffLabError(Exception):
    """Base class for library errors."""


class DomainError(CutoffLabError, ValueError):
    """State outside the domain of the potential (e.g. Dyson ordering violated)."""


class NonFiniteError(CutoffLabError, FloatingPointError):
    """A computation produced NaN or infinity."""


class DimensionMismatchError(CutoffLabError, ValueError):
    pass


class DegenerateError(CutoffLabError, ValueError):
    """A density-based divergence was asked for a Dirac (zero variance) law."""


class QuadratureError(CutoffLabError, RuntimeError):
    pass


class CollisionError(CutoffLabError, RuntimeError):
    """Dyson particles kept colliding after the maximal number of step halvings."""


class LengthMismatchError(CutoffLabError, ValueError):
    pass


class SizeLimitError(CutoffLabError, ValueError):
    pass


class InsufficientSamplesError(CutoffLabError, ValueError):
    pass


class EmptySetError(CutoffLabError, ValueError):
    pass


class NonpositiveTimeError(CutoffLabError, ValueError):
    pass


class OrderingError(CutoffLabError, ValueError):
    pass


class ConvergenceError(CutoffLabError, RuntimeError):
    pass


class ConfigError(CutoffLabError, ValueError):
    """Invalid configuration (maps to CLI exit code 2)."""
