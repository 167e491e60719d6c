"""Exception hierarchy shared by the simulator, planner, encoder and harness."""


class GroverDistError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(GroverDistError, ValueError):
    pass


class InvalidOracleError(GroverDistError, ValueError):
    pass


class OutOfRangeError(GroverDistError, IndexError):
    pass


class InvalidMarkedCountError(GroverDistError, ValueError):
    pass


class NotApplicableError(GroverDistError, ValueError):
    """A recursion was asked for a quantity that does not exist in this state."""


class OvershootError(GroverDistError, ValueError):
    """Target probability lies above what the Grover scan can reach.

    ``best`` carries the closest achievable per-state probability and ``step``
    the encoding step index when raised from the encoder.
    """

    def __init__(self, message, best=None, target=None, step=None):
        super().__init__(message)
        self.best = best
        self.target = target
        self.step = step


class ExhaustedBranchError(GroverDistError, ValueError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class PartitionError(GroverDistError, ValueError):
    pass


class NormalizationError(GroverDistError, ValueError):
    pass


class InfeasibleTargetError(GroverDistError, ValueError):
    pass


class InconsistentCountsError(GroverDistError, ValueError):
    pass


class BudgetError(GroverDistError, ValueError):
    """Simulation would exceed the desk-scale resource budget."""


class StalePartitionError(GroverDistError, ValueError):
    pass


class InvalidActionError(GroverDistError, ValueError):
    pass


class ConfigError(GroverDistError, ValueError):
    pass
