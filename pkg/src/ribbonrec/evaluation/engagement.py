"""Exposure ledger and per-arm engagement (games and game time per acting user)."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from ..catalog import Strategy
from ..events import GameView, RecommendationRecord


class ExposureLedger:
    """Per-child ribbons in time order; each is live until the child's next one."""

    def __init__(self, records, children=None, period_end: datetime | None = None):
        keep = None if children is None else set(children)
        by_child: dict[str, list[RecommendationRecord]] = {}
        for r in records:
            if keep is None or r.child_id in keep:
                by_child.setdefault(r.child_id, []).append(r)
        for recs in by_child.values():
            recs.sort(key=lambda r: r.generated_at)
        self.by_child = by_child
        self.period_end = period_end
        self._starts = {c: [r.generated_at.timestamp() for r in recs] for c, recs in by_child.items()}

    def children(self) -> list[str]:
        return sorted(self.by_child)

    def intervals(self, child_id: str) -> list[tuple[float, float, RecommendationRecord]]:
        recs = self.by_child.get(child_id, [])
        end = math.inf if self.period_end is None else self.period_end.timestamp()
        out = []
        for i, r in enumerate(recs):
            hi = recs[i + 1].generated_at.timestamp() if i + 1 < len(recs) else end
            out.append((r.generated_at.timestamp(), hi, r))
        return out

    def live_ribbon(self, child_id: str, t: float) -> RecommendationRecord | None:
        starts = self._starts.get(child_id)
        if not starts:
            return None
        i = bisect.bisect_right(starts, t) - 1
        if i < 0:
            return None
        if i == len(starts) - 1 and self.period_end is not None and t >= self.period_end.timestamp():
            return None
        return self.by_child[child_id][i]


@dataclass
class EngagementReport:
    arm: str
    strategy: str
    num_users: int = 0
    ang: float | None = None
    agt: float | None = None
    median_games: float | None = None
    median_time: float | None = None
    variance_games: float | None = None
    variance_time: float | None = None
    empty: bool = True
    games_per_user: dict[str, int] = field(default_factory=dict)
    time_per_user: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "arm", "strategy", "num_users", "ang", "agt", "median_games", "median_time",
            "variance_games", "variance_time", "empty")}


def _var(x):
    return float(np.var(x, ddof=1)) if len(x) > 1 else None


def attributed_games(ledger: ExposureLedger, view: GameView, strategy: Strategy,
                     attribution: str = "slot"):
    """Per-child (games, seconds) on apps live in the child's ribbon at play time.

    ``attribution="slot"`` counts only slots whose source is ``strategy``;
    ``"arm"`` counts every slot of the ribbon.
    """
    if attribution not in ("slot", "arm"):
        raise ValueError(f"attribution must be 'slot' or 'arm', got {attribution!r}")
    strategy = Strategy(strategy)
    games: dict[str, int] = {}
    time: dict[str, float] = {}
    live_apps: dict[int, set] = {}
    for e, t in zip(view.events, view.start):
        rib = ledger.live_ribbon(e.child_id, t)
        if rib is None:
            continue
        apps = live_apps.get(id(rib))
        if apps is None:
            apps = {s.app_id for s in rib.slots if attribution == "arm" or s.source is strategy}
            live_apps[id(rib)] = apps
        if e.app_id in apps:
            games[e.child_id] = games.get(e.child_id, 0) + 1
            time[e.child_id] = time.get(e.child_id, 0.0) + e.duration_s
    return games, time


def engagement_metrics(ledger: ExposureLedger, view: GameView, arm, strategy: Strategy,
                       attribution: str = "slot") -> EngagementReport:
    """Average games and game time over users with at least one attributed game.

    ``view`` should be qualified with the evaluation policy and ``ledger``
    restricted to the arm's children.
    """
    arm_name = getattr(arm, "value", arm)
    games, time = attributed_games(ledger, view, strategy, attribution)
    rep = EngagementReport(str(arm_name), Strategy(strategy).value)
    users = sorted(games)
    if not users:
        return rep
    g = np.array([games[u] for u in users], dtype=np.float64)
    s = np.array([time[u] for u in users], dtype=np.float64)
    rep.num_users = len(users)
    rep.ang = float(g.sum() / len(users))
    rep.agt = float(s.sum() / len(users))
    rep.median_games = float(np.median(g))
    rep.median_time = float(np.median(s))
    rep.variance_games = _var(g)
    rep.variance_time = _var(s)
    rep.empty = False
    rep.games_per_user = {u: games[u] for u in users}
    rep.time_per_user = {u: time[u] for u in users}
    return rep
