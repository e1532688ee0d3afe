"""Exception hierarchy shared by the analytical and simulation paths."""


class WlanSdarError(Exception):
    """Base class for all package errors."""


class ScenarioError(WlanSdarError, ValueError):
    """Invalid scenario or parameter set."""


class NonPositiveNodes(ScenarioError):
    pass


class NegativeRate(ScenarioError):
    pass


class ZeroBuffer(ScenarioError):
    pass


class NumericError(WlanSdarError, ArithmeticError):
    """A numerical routine failed; CLI maps these to exit code 3."""


class NoConvergence(NumericError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class RowSumViolation(NumericError):
    pass


class SingularSystem(NumericError):
    pass


class NoAttempts(NumericError):
    pass


class NoDepartures(NumericError):
    pass


class InconsistentThroughput(NumericError):
    pass


class StateSpaceTooLarge(WlanSdarError, ValueError):
    pass


class EmptyRun(WlanSdarError, ValueError):
    pass
