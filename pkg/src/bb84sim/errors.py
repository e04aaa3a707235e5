"""Exception types shared across the package."""


class Bb84Error(Exception):
    """Base class for all package-specific errors."""


class ParamOutOfRange(Bb84Error, ValueError):
    """A numeric parameter fell outside its documented range."""


class SpaceMismatch(Bb84Error, ValueError):
    """Two objects built on different Hilbert spaces were combined."""


class CopiesExceedCap(Bb84Error, ValueError):
    """Requested more photon copies than the space's photon-number cap."""


class NotHermitian(Bb84Error, ValueError):
    """Matrix is not Hermitian within tolerance."""


class InvalidPovm(Bb84Error, ValueError):
    """Operator set is not positive or does not sum to the identity."""


class NotSinglePhoton(Bb84Error, ValueError):
    """State was expected to carry exactly one photon."""


class TooFewCopies(Bb84Error, ValueError):
    """Measure-and-split filtering needs at least two photon copies."""


class IncompleteProbeSet(Bb84Error, ValueError):
    """Probe states do not span the operator space of a photon-number block."""


class EmptyCounts(Bb84Error, ValueError):
    """Count table contains no events for some probe."""


class ConfigError(Bb84Error, ValueError):
    """Experiment configuration failed validation."""
