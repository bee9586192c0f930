"""Exception types raised across the package."""


class BecQubitError(Exception):
    """Base class for all package errors."""


class InvalidStateError(BecQubitError, ValueError):
    """A state violates normalization, purity or shape requirements."""


class StepSizeError(BecQubitError, ValueError):
    pass


class EmptyScheduleError(BecQubitError, ValueError):
    pass


class ParticleCountError(BecQubitError, ValueError):
    """Particle counts are invalid or do not match."""


class NonOrthogonalError(BecQubitError, ValueError):
    pass


class EigensolverError(BecQubitError, RuntimeError):
    pass


class ConfigError(BecQubitError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
