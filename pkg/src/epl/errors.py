"""Exception hierarchy shared by all epl modules."""


class EplError(Exception):
    """Base class for every error raised by epl."""


class ParameterError(EplError, ValueError):
    pass


class DomainError(EplError, ValueError):
    pass


class ConstraintError(ParameterError):
    """A process parameter violates a structural constraint (e.g. 4*sum(a_n) >= 1)."""


class PrecisionError(EplError):
    """A requested numerical precision cannot be reached with the given inputs."""


class NumericError(EplError, ArithmeticError):
    pass


class DegeneratePartitionError(EplError):
    """Two partition or refinement points collide, giving a zero-width ramp."""


class CoarsePartitionError(ParameterError):
    pass


class ResolutionError(EplError):
    """The scan grid is too coarse to separate structures of the distribution."""


class ConsistencyError(EplError):
    pass


class ApplicabilityError(EplError):
    """The requested diagnostic is not defined for this kind of process."""
