"""Domain errors raised by the simulation and analysis services."""
from typing import List, Optional


class ModelDomainError(ValueError):
    """An argument lies outside the domain where a model formula is defined."""


class NoServingBaseStationError(RuntimeError):
    """The sampled base-station field is empty, so the typical UE has no server."""


class PilotBudgetExhaustedError(ValueError):
    """Fewer than one pilot symbol is left for a direct or loop-interference link."""


class QuadratureError(RuntimeError):
    """A numerical integral did not reach its tolerance."""

    def __init__(self, message: str, error_estimate: Optional[float] = None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConfigValidationError(ValueError):
    """One or more configuration values are invalid. Every issue is listed."""

    def __init__(self, issues: List[str]):
        self.issues = list(issues)
        super().__init__("Invalid configuration:\n" + "\n".join(f"  - {issue}" for issue in self.issues))


class InsufficientTrialsError(RuntimeError):
    """Too few valid Monte Carlo trials for the requested estimator."""


DOMAIN_ERRORS = (
    ModelDomainError,
    NoServingBaseStationError,
    PilotBudgetExhaustedError,
    QuadratureError,
    ConfigValidationError,
    InsufficientTrialsError,
)
