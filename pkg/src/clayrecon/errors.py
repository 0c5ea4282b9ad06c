"""Exception hierarchy shared by every module of the package."""


class ClayReconError(Exception):
    """Base class for all errors raised by clayrecon."""


class DegenerateInput(ClayReconError, ValueError):
    """Input points are too few, collinear, coincident or otherwise unusable."""


class DegenerateGeometry(ClayReconError, ValueError):
    """A mesh element has (numerically) zero size."""


class EmptyInput(ClayReconError, ValueError):
    """An operation that needs at least one point received none."""


class TrackingGap(ClayReconError):
    """Two consecutive marker frames are too far apart to unwrap the angle."""


class InsufficientRotation(ClayReconError, ValueError):
    """The frames handed to a revolution merge do not span a full turn."""


class SingularSystem(ClayReconError):
    """The constrained Laplacian cannot be factored (unconstrained component)."""


class NoConstraints(ClayReconError, ValueError):
    """An ARAP solve was requested without any positional constraint."""


class NoKinematicAdapter(ClayReconError):
    """A joint-space frame was given but no forward-kinematics adapter is set."""


class NoBaseVertices(ClayReconError):
    """No mesh vertex lies in the wheel-attachment band."""


class ToolSwallowsClay(ClayReconError):
    """The tool polygon covers the whole clay profile."""


class ConfigError(ClayReconError, ValueError):
    """Invalid pipeline configuration; the message names the offending key."""


class EmptyReport(ClayReconError, ValueError):
    """A report with no rows cannot be summarised."""
