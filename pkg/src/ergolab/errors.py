"""Exception types shared across the package."""


class ErgolabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ErgolabError):
    """A constructed object violates one of its declared invariants."""


class DimensionError(ErgolabError):
    """Operands have incompatible sizes (state counts, word lengths, ...)."""


class ParameterError(ErgolabError):
    """A function argument is outside its documented range."""


class InsufficientDataError(ErgolabError):
    """A sample is too short to produce the requested estimate at all."""


class ReturnTimeOverflowError(ErgolabError):
    """No return to the target set within the configured horizon."""

    def __init__(self, horizon, message=None):
        self.horizon = horizon
        super().__init__(message or f"no return within horizon {horizon}")


class PreconditionError(ErgolabError):
    """An experiment's base-system precondition failed; the run is refused."""
