"""Exception taxonomy shared by all modules.

The CLI maps these onto process exit codes, so solver and checker code
should raise the most specific class that applies.
"""


class SubeqError(Exception):
    """Base class for all library errors."""


class InputError(SubeqError, ValueError):
    """Malformed or non-finite input data (bad shapes, NaNs, bad schema)."""


class DomainError(SubeqError, ValueError):
    """Input is well-formed but outside an operation's mathematical domain."""


class ConstructionError(SubeqError):
    """An object's invariants cannot be satisfied at construction time."""


class NumericalError(SubeqError):
    """A numerical routine failed to reach its declared accuracy."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class ConvergenceError(NumericalError):
    """Iteration budget exhausted before the convergence test passed."""


class InitializationError(SubeqError):
    """No admissible starting point (e.g. no verified subsolution)."""


class PreconditionError(SubeqError):
    """A documented operation precondition failed on the given data."""

    def __init__(self, msg, detail=None):
        super().__init__(msg)
        self.detail = detail or {}


class ScheduleError(SubeqError):
    """A staged construction ran out of budget before meeting its target."""

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved or {}
