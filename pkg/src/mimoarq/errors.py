"""Exception types shared across the package."""


class MimoArqError(Exception):
    """Base class for domain errors raised by this package."""


class ConfigError(MimoArqError):
    """Experiment configuration failed validation.

    Carries the full list of violations so callers can report every
    problem at once instead of the first one hit.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CapacityExceededError(MimoArqError):
    """A requested enumeration exceeds a documented size limit."""


class SnrOutOfRangeError(MimoArqError):
    """Requested SNR falls outside the table grid (no extrapolation)."""


class DesignInfeasibleError(MimoArqError):
    """Threshold design cannot satisfy strict ascent on some branch."""


class ProtocolViolationError(MimoArqError):
    """Accumulated MI fell below its branch floor beyond tolerance."""


class InfeasibleError(MimoArqError):
    """Power optimization has no feasible point on the given grid."""
