"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by the package."""


class OutOfDomainError(LabError, ValueError):
    """A point or parameter lies outside the region where an operation is defined."""


class FormatError(LabError, ValueError):
    """A binary or text artifact does not match its declared format."""


class DegenerateInputError(LabError, ValueError):
    """The input carries no information the operation can work with (e.g. all-zero)."""


class SingularGeometryError(LabError, ValueError):
    """A geometric construction is undefined at the requested point."""


class ConfigurationError(LabError, ValueError):
    """A scenario or solver configuration violates a stability or sizing rule."""


class InstabilityError(LabError, RuntimeError):
    """The time stepper produced non-finite values."""


class PreconditionError(LabError, ValueError):
    """A hypothesis required by an experiment does not hold for the given inputs."""
