"""Tool-call count summaries."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

BUCKET_WIDTH = 5


@dataclass(frozen=True)
class ToolCallStats:
    mean: float
    median: float
    histogram: dict[int, int]
    n: int

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "median": self.median,
                "histogram": {str(k): v for k, v in sorted(self.histogram.items())}}


def bucket_of(count: int, width: int = BUCKET_WIDTH) -> int:
    """Lower edge of the bucket holding ``count``."""
    return (count // width) * width


def histogram(counts: Sequence[int], width: int = BUCKET_WIDTH) -> dict[int, int]:
    return dict(sorted(Counter(bucket_of(c, width) for c in counts).items()))


def toolcall_stats(counts: Sequence[int], width: int = BUCKET_WIDTH) -> ToolCallStats:
    """Exact mean, lower median and a width-5 histogram keyed by bucket lower edge."""
    if not counts:
        raise ValueError("counts must be non-empty")
    if any(c < 0 for c in counts):
        raise ValueError("counts must be >= 0")
    ordered = sorted(counts)
    mean = float(Fraction(sum(ordered), len(ordered)))
    median = float(ordered[(len(ordered) - 1) // 2])
    return ToolCallStats(mean, median, histogram(ordered, width), len(ordered))
