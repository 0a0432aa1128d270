"""Exception hierarchy shared across the package."""


class LatticeDRError(Exception):
    pass


class PosetError(LatticeDRError):
    pass


class CycleDetected(PosetError):
    pass


class NotReduced(PosetError):
    pass


class NotAnIdeal(LatticeDRError):
    pass


class CapExceeded(LatticeDRError):
    """Raised when an exhaustive enumeration would exceed its configured cap."""

    def __init__(self, message, count=None, cap=None):
        super().__init__(message)
        self.count = count
        self.cap = cap


class OutOfBox(LatticeDRError):
    pass


class EmptyMotion(LatticeDRError):
    pass


class NoConvergence(LatticeDRError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ValidationFailed(LatticeDRError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
