"""Exception types shared across the package."""


class BeamformingError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(BeamformingError, ValueError):
    """Operands have inconsistent shapes."""


class SingularMatrixError(BeamformingError, ArithmeticError):
    """A Hermitian solve failed even after ridge regularization."""


class RankDeficiencyError(BeamformingError, ArithmeticError):
    """The equality-constraint matrix is row-rank deficient, so the
    zero-forcing constraint is degenerate (e.g. too few antennas)."""


class InfeasibleError(BeamformingError, ValueError):
    """A power budget lies below the minimum power any constraint-satisfying
    precoder must spend."""


class MaxIterationsError(BeamformingError, RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class ConfigError(BeamformingError, ValueError):
    """A scenario or experiment configuration violates an invariant."""
