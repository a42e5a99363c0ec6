"""Small numeric helpers shared by predicates and the benchmark tooling."""

from __future__ import annotations

import math
from typing import Sequence


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation is undefined (zero variance in an input)."""


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient of two equal-length series.

    Raises ``ValueError`` on length mismatch or fewer than 2 points, and
    ``UndefinedCorrelationError`` when either series has zero variance.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 points")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    return sxy / math.sqrt(sxx * syy)
