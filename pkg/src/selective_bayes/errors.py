"""Error taxonomy.

Every error carries an exit category used by the CLI:
2 = bad input, 3 = selection/feasibility, 4 = convergence, 5 = internal.
"""

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SELECTION = 3
EXIT_CONVERGENCE = 4
EXIT_INTERNAL = 5


class SelectiveBayesError(Exception):
    """Base class; subclasses set exit_category."""

    exit_category = EXIT_INTERNAL


class ContractViolationError(SelectiveBayesError):
    """Dimension mismatch or malformed argument."""

    exit_category = EXIT_INPUT


class DegenerateDesignError(SelectiveBayesError):
    """Selected design is rank deficient or too ill conditioned to trust."""

    exit_category = EXIT_INPUT


class UnsupportedPriorError(SelectiveBayesError):
    """Prior not usable for the requested operation (e.g. mixture MAP)."""

    exit_category = EXIT_INPUT


class WrongRegimeError(SelectiveBayesError):
    """Operation called outside its regime (e.g. randomized-only op at gamma2=0)."""

    exit_category = EXIT_INPUT


class InvalidSplitError(SelectiveBayesError):
    """Carving split would leave a degenerate stage."""

    exit_category = EXIT_INPUT


class InsufficientSamplesError(SelectiveBayesError):
    """Chain too short for the requested summary."""

    exit_category = EXIT_INPUT


class GridRangeError(SelectiveBayesError):
    """Query point outside a tabulated grid."""

    exit_category = EXIT_INPUT


class EmptySelectionError(SelectiveBayesError):
    """Lasso selected nothing; post-selection inference is undefined."""

    exit_category = EXIT_SELECTION


class InfeasibleStartError(SelectiveBayesError):
    """No strictly interior point available for a barrier solve."""

    exit_category = EXIT_SELECTION


class OutOfEventError(SelectiveBayesError):
    """Observed statistic violates the selection event it conditions on."""

    exit_category = EXIT_SELECTION


class ConvergenceError(SelectiveBayesError):
    """Iterative solver exhausted its budget."""

    exit_category = EXIT_CONVERGENCE


class DivergenceError(SelectiveBayesError):
    """Sampler produced a non-finite iterate (step too large)."""

    exit_category = EXIT_CONVERGENCE

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class LowAcceptanceError(SelectiveBayesError):
    """Rejection sampler starved; observed acceptance rate attached."""

    exit_category = EXIT_CONVERGENCE

    def __init__(self, message, rate=None):
        super().__init__(message)
        self.rate = rate
