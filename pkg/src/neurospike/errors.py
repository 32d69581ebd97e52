"""Exception types raised across the package."""


class NeuroSpikeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NeuroSpikeError, ValueError):
    """Invalid parameters, dimensions or scenario documents."""


class PreconditionError(NeuroSpikeError, ValueError):
    """An operation was called outside its domain."""


class ContractError(PreconditionError):
    """A state or trace violates the contract of the called operation."""


class DesignError(NeuroSpikeError, ValueError):
    """Controller parameters violate one of the certification inequalities.

    ``inequality`` holds a short human-readable statement of the violated
    constraint, e.g. ``"delta <= rho*alpha/(mu+a)"``.
    """

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class NoSpikeError(NeuroSpikeError, ValueError):
    """The closed loop never fires again from the given state."""


class NumericalFailure(NeuroSpikeError, ArithmeticError):
    """Non-finite values produced while integrating the flow.

    Attributes
    ----------
    state : tuple of float
        The state at which the failure was detected.
    trace : HybridTrace or None
        Partial trace up to the failure, when raised from ``simulate``.
    """

    def __init__(self, message, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace
