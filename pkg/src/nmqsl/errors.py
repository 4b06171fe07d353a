"""Exception types shared across the package."""


class DomainError(ValueError):
    """A rate profile was evaluated outside its domain (e.g. past a divergence)."""


class RegimeError(ValueError):
    """A control strategy was requested outside the regime where it applies."""


class IntegrationError(RuntimeError):
    """The adaptive integrator could not meet its tolerance."""
