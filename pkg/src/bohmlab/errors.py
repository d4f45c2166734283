"""Exception types shared across the package."""


class BohmlabError(Exception):
    """Base class for all package errors."""


class ZeroNormError(BohmlabError):
    """Wavefunction norm is numerically zero; cannot normalize."""


class GridMismatchError(BohmlabError):
    """Two objects that must share a grid do not."""


class TimeMismatchError(BohmlabError):
    """Ensemble and wavefunction time stamps disagree."""


class VanishingOverlapError(BohmlabError):
    """Pre/post-selection overlap too small; weak value undefined."""


class PreconditionViolatedError(BohmlabError):
    """A verified precondition failed (carries the offending residual)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedOperatorError(BohmlabError):
    """No exact or split coupling implementation for this operator."""


class ConfigParseError(BohmlabError):
    """Config document is not well-formed JSON (duplicate keys included)."""


class ConfigValidationError(BohmlabError):
    """Config violated one or more invariants; lists every violation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IOFailureError(BohmlabError):
    """Output file could not be written."""
