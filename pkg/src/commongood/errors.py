"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """Malformed problem input: missing field, wrong sign, non-finite number."""


class AssumptionError(ValueError):
    """A well-formed scenario that violates a standing modelling assumption."""

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""


class BracketError(RuntimeError):
    """A root search could not find a sign change."""


class AsymmetryError(ValueError):
    """Players have distinct thresholds, so no regular-control MPE exists."""


class SimulationError(RuntimeError):
    """Raised when a simulated state becomes non-finite."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
