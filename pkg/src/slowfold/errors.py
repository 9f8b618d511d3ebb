"""Exception hierarchy shared by all slowfold modules."""


class SlowfoldError(Exception):
    """Base class for all slowfold errors."""


class AssumptionError(SlowfoldError):
    """A structural assumption on the system (decay rates, Lipschitz gap,
    weight condition) is violated.  The message names the assumption and the
    offending numbers."""


class NoContractionError(SlowfoldError):
    """The fixed-point operator is not a contraction at the requested
    parameters (contraction factor >= 1)."""


class WindowError(SlowfoldError):
    """A time grid or noise window is too small for the requested
    operation (truncation tail above tolerance, shift outside the stored
    window, step too coarse)."""


class SolverError(SlowfoldError):
    """An iterative solver failed to converge within its budget."""


class ConfigError(SlowfoldError):
    """An experiment configuration could not be parsed or validated."""
