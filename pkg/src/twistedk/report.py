"""Small result containers shared by the checking routines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class CheckFailure(RuntimeError):
    """Raised when a precondition check fails; carries the offending report."""

    def __init__(self, message: str, report: "CheckReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass
class CheckReport:
    name: str
    tolerance: float
    residuals: dict[str, float] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)
    vacuous: bool = False
    limits: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return all(r < self.limits.get(k, self.tolerance) for k, r in self.residuals.items())

    def record(self, key: str, value: float) -> None:
        """Keep the maximum residual seen under ``key``."""
        value = float(value)
        if value != value:  # NaN
            value = float("inf")
        self.residuals[key] = max(self.residuals.get(key, 0.0), value)

    def raise_if_failed(self) -> "CheckReport":
        if not self.passed:
            bad = {k: v for k, v in self.residuals.items() if not v < self.limits.get(k, self.tolerance)}
            raise CheckFailure(f"{self.name} failed: {bad}", self)
        return self

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"check": self.name, "passed": self.passed, "tolerance": self.tolerance}
        out["residuals"] = dict(self.residuals)
        if self.vacuous:
            out["vacuous"] = True
        if self.details:
            out["details"] = dict(self.details)
        return out
