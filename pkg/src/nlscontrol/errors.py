"""Exception hierarchy.

Everything numerical derives from :class:`NumericalFailure` so the CLI can
map it onto a single exit code and name the failing phase.
"""


class NumericalFailure(RuntimeError):
    """Base class for failures of a numerical procedure."""

    phase = None

    def with_phase(self, phase):
        self.phase = phase
        return self


class BlowUpError(NumericalFailure):
    """Non-finite values or runaway norm growth during time stepping."""


class UnderResolvedError(NumericalFailure):
    """Spectral tail energy exceeded the monitor threshold."""


class CGConvergenceError(NumericalFailure):
    """Conjugate gradient did not reach the requested residual."""


class ContractionError(NumericalFailure):
    """Picard iteration failed to contract (data above the smallness gate)."""

    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


class DecayTooSlowError(NumericalFailure):
    """Damped evolution did not reach the threshold before ``t_max``."""

    def __init__(self, message, fit=None, trace=None):
        super().__init__(message)
        self.fit = fit
        self.trace = trace


class SteeringError(NumericalFailure):
    """Global steering failed verification."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
