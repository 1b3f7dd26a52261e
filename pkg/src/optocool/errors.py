"""Exception hierarchy shared across the package."""


class OptocoolError(Exception):
    """Base class for all package errors."""


class InstabilityError(OptocoolError):
    """Raised when the mechanical mode is dynamically unstable (gamma_eff <= 0)
    or a time-domain integration diverges."""


class FitError(OptocoolError):
    """A fit could not be carried out or did not converge.

    ``reason`` is one of ``"no-peak"``, ``"non-convergence"``,
    ``"max-iterations"``, ``"singular-jacobian"``, ``"unidentifiable"``,
    ``"invalid-init"``.
    """

    def __init__(self, reason, message=""):
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


class CalibrationError(OptocoolError):
    """The reference calibration peak is missing or too weak."""


class ConfigError(OptocoolError, ValueError):
    """Invalid scenario configuration or malformed input file."""
