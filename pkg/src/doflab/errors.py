"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter is outside the domain an operation is defined on."""


class DegenerateChannelError(RuntimeError):
    """A channel draw is unusable (zero estimate, vanishing denominator).

    Callers that own a random stream are expected to resample; see the
    guard constants in :mod:`doflab.model`.
    """


class DegenerateSchemeError(DomainError):
    """The requested scheme construction collapses for these parameters."""
