from __future__ import annotations

import math
from dataclasses import dataclass

LOWER_BETTER = "lower-better"
HIGHER_BETTER = "higher-better"
POLARITIES = (LOWER_BETTER, HIGHER_BETTER)


class ScorerError(RuntimeError):
    """A quality metric could not produce a score."""


@dataclass(frozen=True)
class IqaScore:
    metric: str
    value: float
    polarity: str = LOWER_BETTER

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")
        if not math.isfinite(self.value):
            raise ScorerError(f"{self.metric}: non-finite score {self.value}")

    @property
    def badness(self) -> float:
        """Sort key where smaller is always better."""
        return self.value if self.polarity == LOWER_BETTER else -self.value
