"""Exception hierarchy shared by the lab modules."""


class LabError(Exception):
    """Base class for all errors raised by rmtlab."""


class ShapeError(LabError, ValueError):
    pass


class NotHermitianError(LabError, ValueError):
    pass


class ConvergenceError(LabError, RuntimeError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class BranchAmbiguityError(LabError, RuntimeError):
    pass


class DegenerateTruncationError(LabError, ValueError):
    pass


class NearSingularError(LabError, ValueError):
    pass


class CapExceededError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
