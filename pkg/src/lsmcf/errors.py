"""Exception types shared across the package."""


class LsmcfError(Exception):
    """Base class for all package errors."""


class SpecError(LsmcfError, ValueError):
    """Invalid geometric or numerical parameters."""


class ConfigError(LsmcfError, ValueError):
    """Experiment configuration failed validation."""


class CertificationFailure(LsmcfError):
    """Initial data failed the approximate-curvature certification."""


class BlowupError(LsmcfError, FloatingPointError):
    """Time stepping produced non-finite or runaway values."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class EmptyLevelSet(LsmcfError):
    """The requested level value is not attained on the grid."""


class DegenerateTest(LsmcfError):
    """A residual normalization is too small to form a relative residual."""
