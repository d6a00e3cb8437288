class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class UnsupportedError(ValueError):
    """The requested combination of model, loss and space is not handled."""
