"""Exception hierarchy shared by all cbrw modules."""
from __future__ import annotations

from dataclasses import dataclass


class CbrwError(Exception):
    """Base class for every error raised by this package."""


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ValidationError(CbrwError, ValueError):
    """Raised with the complete list of violated invariants."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


class DomainError(CbrwError, ValueError):
    pass


class NotTransient(DomainError):
    pass


class NotTransientRight(NotTransient):
    pass


class NotSubcritical(DomainError):
    pass


class NotCritical(DomainError):
    pass


class ZeroVariance(DomainError):
    pass


class InsufficientHits(CbrwError):
    pass


class CountOverflow(CbrwError, OverflowError):
    pass


class PopulationGuardExceeded(CbrwError):
    pass


class DegenerateDistribution(UserWarning):
    """Warned when the offspring law is the point mass at one."""
