"""Click-through by ribbon position."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

VISIBLE = (1, 2, 3, 4, 5)
HIDDEN = (6, 7)

# Accumulated clicks per position from the field pilot, with the printed means.
PUBLISHED_CLICKS = (6329, 5834, 4516, 2639, 3960, 3150, 2937)
PUBLISHED_MEANS = {"visible": 4830, "hidden": 3044}


@dataclass
class ClickPositionReport:
    clicks: list[int]
    mean_visible: float
    mean_hidden: float
    rank: list[int]
    flags: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"clicks": self.clicks, "mean_visible": self.mean_visible,
                "mean_hidden": self.mean_hidden, "rank": self.rank, "flags": self.flags}


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def clicks_by_position(events: Iterable) -> list[int]:
    counts = [0] * 7
    for e in events:
        counts[e.position - 1] += 1
    return counts


def click_position_analysis(clicks, reference_means: dict | None = None) -> ClickPositionReport:
    """Group means and per-position ranks (most clicks first, ties by position).

    With ``reference_means`` (keys ``visible``/``hidden``), each computed mean
    is compared against the reference after rounding and any mismatch is
    flagged.
    """
    clicks = [int(c) for c in clicks]
    if len(clicks) != 7 or min(clicks) < 0:
        raise ValueError("expected 7 nonnegative click counts")
    mean_visible = sum(clicks[p - 1] for p in VISIBLE) / len(VISIBLE)
    mean_hidden = sum(clicks[p - 1] for p in HIDDEN) / len(HIDDEN)
    order = sorted(range(1, 8), key=lambda p: (-clicks[p - 1], p))
    rank = [0] * 7
    for r, p in enumerate(order, start=1):
        rank[p - 1] = r
    rep = ClickPositionReport(clicks, mean_visible, mean_hidden, rank)
    for key, computed in (("visible", mean_visible), ("hidden", mean_hidden)):
        if reference_means and key in reference_means:
            ref = reference_means[key]
            rep.flags.append({"mean": key, "computed": computed, "reference": ref,
                              "consistent": round_half_up(computed) == round_half_up(ref)})
    return rep
