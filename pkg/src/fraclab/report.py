"""Verdict records shared by every checker in the package."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of a pointwise (or scalar) inequality check.

    ``max_violation`` is signed: positive means the inequality is violated
    somewhere by that amount, negative means it holds with that much room
    everywhere. ``passed`` is true iff ``max_violation <= tolerance``.
    """

    max_violation: float
    location: Any
    tolerance: float
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @classmethod
    def from_slack(cls, slack, tolerance: float, mask=None, **metadata) -> "InequalityReport":
        """Build a report from a slack field that should be nonnegative.

        Nodes where ``mask`` is False are ignored (e.g. excluded corners).
        """
        slack = np.asarray(slack, dtype=float)
        viol = -slack
        if mask is not None:
            viol = np.where(mask, viol, -np.inf)
        flat = int(np.argmax(viol))
        loc = np.unravel_index(flat, slack.shape) if slack.ndim > 1 else flat
        if isinstance(loc, tuple):
            loc = tuple(int(i) for i in loc)
        return cls(float(viol.flat[flat]), loc, float(tolerance), dict(metadata))

    def __str__(self) -> str:
        name = self.metadata.get("check", "check")
        return (f"{name}: {self.verdict} (max violation {self.max_violation:.3e} "
                f"at {self.location}, tol {self.tolerance:.1e})")
