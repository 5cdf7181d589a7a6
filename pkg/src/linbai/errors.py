"""Exception hierarchy shared by all linbai modules."""


class LinbaiError(Exception):
    """Base class for all package-specific errors."""


class InputError(LinbaiError):
    """A caller-supplied value is malformed (wrong shape, NaN, negative, ...)."""


class DimensionError(InputError):
    """Operands have incompatible dimensions."""


class ConfigError(LinbaiError):
    """A configuration file or parameter combination is invalid."""


class DegenerateTargetError(ConfigError):
    """The target set has fewer than two candidates, so identification is vacuous."""


class RankError(LinbaiError):
    """A matrix that must be full rank is rank deficient."""


class NumericalError(LinbaiError):
    """A numerical routine failed (factorization breakdown, non-convergence)."""
