"""Exception hierarchy shared by the lattice engine, the Yosida toolkit and the CLI."""


class GBSDEError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(GBSDEError):
    """Malformed or inconsistent configuration. ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(GBSDEError):
    """A numerical routine could not produce a trustworthy answer."""


class BracketFailure(NumericalError):
    pass


class ToleranceFailure(NumericalError):
    pass


class StepConditionViolation(NumericalError):
    pass


class ContractionViolation(NumericalError):
    pass


class NonFiniteValue(NumericalError):
    """A payoff or generator returned inf/nan; ``location`` is (slice, node) when known."""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(message if location is None else f"{message} at node {location}")


class EnumerationCapExceeded(GBSDEError):
    pass
