"""
Error hierarchy for the energy storage app.
Management commands map ConfigError to exit code 1 and every other
EnergyError to exit code 2.
"""


class EnergyError(Exception):
    """Base class for all errors raised by the energy app."""


class DomainError(EnergyError, ValueError):
    """A precondition or invariant of the storage model was violated."""


class InfeasibleDecisionError(DomainError):
    """A policy produced a decision that violates the model constraints."""

    def __init__(self, key, violations):
        self.key = key
        self.violations = list(violations)
        super().__init__(
            f"infeasible decision for state {key}: {', '.join(self.violations)}"
        )


class InstanceTooLargeError(DomainError):
    """Brute-force enumeration refused because the instance is too large."""


class SingularMatrixError(EnergyError):
    """The regression design matrix is rank deficient."""


class ConfigError(EnergyError):
    """Invalid run configuration (unknown key, bad value, missing field)."""


class HindsightViolation(EnergyError):
    """A policy beat the hindsight optimum, which means a solver bug."""
