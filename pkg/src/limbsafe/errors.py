class LimbsafeError(Exception):
    """Base class for all errors raised by the package."""


class ScenarioError(LimbsafeError, ValueError):
    """Malformed or invalid scenario document."""


class SingularConfiguration(LimbsafeError):
    """The statics system is (numerically) singular at this arm configuration."""

    def __init__(self, message, condition=float("inf"), step=None):
        super().__init__(message)
        self.condition = condition
        self.step = step


class InvalidEndpoint(LimbsafeError):
    def __init__(self, which, reason=""):
        super().__init__(f"{which} is not a valid configuration" + (f": {reason}" if reason else ""))
        self.which = which


class NoPathFound(LimbsafeError):
    pass


class IkDiverged(LimbsafeError):
    pass


class NoFeasibleBase(LimbsafeError):
    def __init__(self, message, samples_tried=0):
        super().__init__(message)
        self.samples_tried = samples_tried


class IllConditioned(LimbsafeError):
    pass


class EndpointOutsideLimits(InvalidEndpoint, ScenarioError):
    """A scenario endpoint lies outside the arm joint limits.

    Both a validation error of the scenario document and an invalid planning
    endpoint, so either handler can catch it.
    """
