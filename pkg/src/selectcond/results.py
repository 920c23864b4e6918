"""Shared result record for all inference routines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class InferenceResult:
    """Point estimate, equal-tailed confidence interval and p-value.

    diagnostics carries free-form numeric context: normalizer strategy,
    Monte-Carlo standard errors, divergence flags.
    """

    estimate: float
    ci: tuple
    pvalue: float
    model_kind: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.ci
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("confidence bounds must not be NaN")
        if lo > hi:
            raise ValueError(f"confidence interval is inverted: ({lo}, {hi})")
        if not (math.isnan(self.pvalue) or 0.0 <= self.pvalue <= 1.0):
            raise ValueError(f"p-value out of [0, 1]: {self.pvalue}")
        # estimate inside the CI is expected whenever everything is finite;
        # divergent fits legitimately violate it, so record instead of raising
        if (
            math.isfinite(lo)
            and math.isfinite(hi)
            and math.isfinite(self.estimate)
            and not lo <= self.estimate <= hi
        ):
            self.diagnostics.setdefault("flags", []).append("estimate-outside-ci")

    @property
    def length(self) -> float:
        return self.ci[1] - self.ci[0]

    def covers(self, value: float) -> bool:
        return self.ci[0] <= value <= self.ci[1]
