"""Exception types shared across the package."""


class LowmachError(Exception):
    """Base class for all package-specific failures."""


class DegenerateState(LowmachError):
    """Both partial densities vanish; the pressure closure is undefined."""


class NonConvergence(LowmachError):
    """Root iteration hit its cap without meeting the residual tolerance."""


class AxisOutOfRange(LowmachError):
    """Requested derivative axis does not exist on the grid."""


class NonPositiveDensity(LowmachError):
    """A density field left the admissible set (min <= 1e-8)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NonDivergenceFree(LowmachError):
    """A velocity field required to be solenoidal is not."""


class InsufficientPoints(LowmachError):
    """Slope fit requested with fewer than three samples."""


class NonPositiveValue(LowmachError):
    """Log-log fit received a value <= 0."""


class FormatVersionMismatch(LowmachError):
    """Persisted file carries an unsupported format version."""


class CorruptCheckpoint(LowmachError):
    """Checkpoint payload fails the length / field-order check."""


class ConfigError(LowmachError):
    """Run configuration failed validation."""
