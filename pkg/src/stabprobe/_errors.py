"""Exception hierarchy shared by all modules."""


class StabProbeError(Exception):
    """Base class for errors raised by stabprobe."""


class InvalidDimensionError(StabProbeError, ValueError):
    pass


class ContractViolationError(StabProbeError, ValueError):
    """An input violates a documented precondition (e.g. not skew, not white)."""


class SingularCovarianceError(StabProbeError, ValueError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue
