"""Exception taxonomy for corrdyn.

Every error raised by the library derives from CorrdynError so batch
drivers can map failures to exit codes in one place.
"""


class CorrdynError(Exception):
    """Base class for all corrdyn errors."""


class ParseError(CorrdynError, ValueError):
    """Malformed correspondence document."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidComponent(CorrdynError, ValueError):
    """Component violates the bidegree or leading-coefficient constraints."""


class NonConvergence(CorrdynError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, iterations=None):
        self.iterations = iterations
        super().__init__(message)


class InsufficientPairs(CorrdynError, ValueError):
    """Probe region yields no usable close pair of points."""


class LengthMismatch(CorrdynError, ValueError):
    """Paths of different lengths passed where equal lengths are required."""


class EmptyPath(CorrdynError, ValueError):
    """Shift applied to a length-zero path."""


class IndexOutOfRange(CorrdynError, IndexError):
    """Coordinate or cylinder index outside the valid range."""


class ScheduleEmpty(CorrdynError, ValueError):
    """Pressure schedule has no (n, eps) rows."""


class TrajectoryEscape(CorrdynError, RuntimeError):
    """Forward trajectory left the representable domain persistently."""


class NotAPartition(CorrdynError, ValueError):
    """Cell collection is not disjoint and exhaustive."""


class PushforwardMismatch(CorrdynError, ValueError):
    """Path measure does not push forward to the requested sphere measure."""


class NoValidCandidates(CorrdynError, ValueError):
    """No candidate path measure satisfies the push-forward constraint."""


class FamilyEmpty(CorrdynError, ValueError):
    """Test-function family is empty."""


class DegreeConditionError(CorrdynError, ValueError):
    """Operation requires the backward degree to exceed the forward degree."""


class DegenerateStart(CorrdynError, RuntimeError):
    """Start point kept landing on degenerate fibers after re-sampling."""


class NotConverged(CorrdynError, RuntimeError):
    """Pullback levels did not stabilize below the certificate bound."""


class PreimageOutsideSupport(CorrdynError, RuntimeError):
    """A backward image fell beyond the dilation ring of the active cells."""


class NonPositiveEigenfunction(CorrdynError, RuntimeError):
    """Eigenfunction lost positivity; normalization impossible."""


class ConfigMismatch(CorrdynError, ValueError):
    """Pipeline stages were configured with incompatible inputs."""
