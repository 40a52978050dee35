"""Exception types shared across the planner, tracker and simulator."""

from __future__ import annotations


class MomplanError(Exception):
    """Base class for all momplan errors."""


class InvalidArgumentError(MomplanError, ValueError):
    """Arguments with mismatched lengths or shapes."""


class ScheduleError(MomplanError, ValueError):
    """Contact schedule does not cover a requested phase or time."""


class TimeRangeError(ScheduleError):
    """Query time outside the horizon or gain window."""


class ScenarioError(MomplanError, ValueError):
    """Scenario document failed validation.

    Carries every violation found, each naming the field and phase index.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid scenario")


class IntegrationError(MomplanError, ArithmeticError):
    """Non-finite wrench sample during numerical integration."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} at t={time:.6f}")


class SolverDivergedError(MomplanError, ArithmeticError):
    """Objective became non-finite during the line search."""

    def __init__(self, message: str, last_iterate):
        self.last_iterate = last_iterate
        super().__init__(message)


class ContractViolation(MomplanError):
    """Precondition of an operation not met by its caller."""


class SimulationAborted(MomplanError):
    """Closed-loop state left the divergence bound."""

    def __init__(self, message: str, log):
        self.log = log
        super().__init__(message)
