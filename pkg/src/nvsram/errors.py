"""Exception types shared across the simulator."""


class NvsramError(Exception):
    """Base class for all simulator errors."""


class ParameterError(NvsramError, ValueError):
    """Invalid physical or numerical parameter."""


class NumericError(NvsramError, ArithmeticError):
    """Non-finite value encountered during integration."""


class SolverError(NvsramError, RuntimeError):
    """Newton iteration failed to converge."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = list(log or [])


class CalibrationError(NvsramError, RuntimeError):
    """Critical-current bisection could not be bracketed."""


class DecodeError(NvsramError, RuntimeError):
    """A simulated waveform does not decode to a definite logic value."""


class ConfigError(NvsramError, ValueError):
    """Malformed or inconsistent configuration."""
