"""Exception types raised by the numerical routines."""


class IntegrationError(RuntimeError):
    """An ODE integration failed; ``location`` is the last s reached."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{message} (at s={location:.6g})")
        self.location = location


class ConvergenceError(RuntimeError):
    """A root finder, Newton solve or eigen-iteration did not converge."""


class PreconditionError(ValueError):
    """Inputs violate a documented precondition."""
