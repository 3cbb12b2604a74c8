"""Telemetry ingestion and qualified game views."""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from .catalog import Strategy, ValidationError

RIBBON_MAX = 7
MAX_MALFORMED_FRACTION = 0.10


class IngestionError(ValidationError):
    """Too many malformed lines in one input file."""


def parse_timestamp(value) -> datetime:
    """ISO-8601 timestamp with an explicit UTC offset, returned in UTC."""
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {value!r}")
    text = value[:-1] + "+00:00" if value.endswith(("Z", "z")) else value
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {value!r} has no UTC offset")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class GameEvent:
    child_id: str
    app_id: str
    start_time: datetime
    duration_s: float

    def __post_init__(self):
        if not (self.duration_s >= 0 and math.isfinite(self.duration_s)):
            raise ValidationError(f"duration_s must be a finite nonnegative number, got {self.duration_s!r}")

    def to_json(self) -> dict:
        return {"child_id": self.child_id, "app_id": self.app_id,
                "start_time": format_timestamp(self.start_time), "duration_s": self.duration_s}


@dataclass(frozen=True)
class ClickEvent:
    child_id: str
    app_id: str
    position: int
    timestamp: datetime

    def __post_init__(self):
        if isinstance(self.position, bool) or not isinstance(self.position, int) \
                or not 1 <= self.position <= RIBBON_MAX:
            raise ValidationError(f"click position must be an integer in [1, 7], got {self.position!r}")

    def to_json(self) -> dict:
        return {"child_id": self.child_id, "app_id": self.app_id,
                "position": self.position, "timestamp": format_timestamp(self.timestamp)}


@dataclass(frozen=True)
class RibbonSlot:
    position: int
    app_id: str
    source: Strategy


@dataclass(frozen=True)
class RecommendationRecord:
    """One generated ribbon. Also the in-memory ribbon type."""

    child_id: str
    generated_at: datetime
    slots: tuple[RibbonSlot, ...] = ()

    def __post_init__(self):
        if len(self.slots) > RIBBON_MAX:
            raise ValidationError(f"ribbon holds at most {RIBBON_MAX} slots, got {len(self.slots)}")
        positions = [s.position for s in self.slots]
        if positions != list(range(1, len(self.slots) + 1)):
            raise ValidationError(f"slot positions must be 1..n in order, got {positions}")
        apps = [s.app_id for s in self.slots]
        if len(set(apps)) != len(apps):
            raise ValidationError("duplicate app_id within a ribbon")

    @property
    def app_ids(self) -> list[str]:
        return [s.app_id for s in self.slots]

    def to_json(self) -> dict:
        return {
            "child_id": self.child_id,
            "generated_at": format_timestamp(self.generated_at),
            "slots": [{"position": s.position, "app_id": s.app_id, "source": s.source.value}
                      for s in self.slots],
        }


Ribbon = RecommendationRecord


@dataclass(frozen=True)
class QualificationPolicy:
    """Duration window and per-pair play cap for a qualified view.

    ``max_plays_per_pair=None`` disables the outlier pair drop.
    """

    min_duration_s: float = 10.0
    max_duration_s: float = 3000.0
    max_plays_per_pair: int | None = 60

    def __post_init__(self):
        if not 0 <= self.min_duration_s < self.max_duration_s:
            raise ValidationError(
                f"need 0 <= min_duration_s < max_duration_s, got {self.min_duration_s}, {self.max_duration_s}"
            )
        if self.max_plays_per_pair is not None and self.max_plays_per_pair < 1:
            raise ValidationError("max_plays_per_pair must be >= 1")

    @classmethod
    def evaluation(cls) -> "QualificationPolicy":
        return cls(10.0, 3000.0, 60)

    @classmethod
    def recommender(cls, min_duration_s=5.0, outlier_filters=False) -> "QualificationPolicy":
        if outlier_filters:
            return cls(min_duration_s, 3000.0, 60)
        return cls(min_duration_s, math.inf, None)


# -- parsing ------------------------------------------------------------------

def _need(obj, fields):
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    missing = [f for f in fields if f not in obj]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")


def _str_id(v, name):
    if not isinstance(v, str) or not v:
        raise ValueError(f"{name} must be a non-empty string")
    return v


def parse_game(obj) -> GameEvent:
    _need(obj, ("child_id", "app_id", "start_time", "duration_s"))
    dur = obj["duration_s"]
    if isinstance(dur, str):
        dur = float(dur)
    if isinstance(dur, bool) or not isinstance(dur, (int, float)):
        raise ValueError("duration_s must be a number")
    if dur < 0:
        raise ValueError(f"negative duration_s {dur}")
    return GameEvent(_str_id(obj["child_id"], "child_id"), _str_id(obj["app_id"], "app_id"),
                     parse_timestamp(obj["start_time"]), float(dur))


def parse_click(obj) -> ClickEvent:
    _need(obj, ("child_id", "app_id", "position", "timestamp"))
    return ClickEvent(_str_id(obj["child_id"], "child_id"), _str_id(obj["app_id"], "app_id"),
                      obj["position"], parse_timestamp(obj["timestamp"]))


def parse_recommendation(obj) -> RecommendationRecord:
    _need(obj, ("child_id", "generated_at", "slots"))
    if not isinstance(obj["slots"], list):
        raise ValueError("slots must be a list")
    slots = []
    for s in obj["slots"]:
        _need(s, ("position", "app_id", "source"))
        slots.append(RibbonSlot(int(s["position"]), _str_id(s["app_id"], "app_id"), Strategy(s["source"])))
    return RecommendationRecord(_str_id(obj["child_id"], "child_id"),
                                parse_timestamp(obj["generated_at"]), tuple(slots))


@dataclass
class IngestReport:
    name: str
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.accepted + len(self.rejected)

    def summary(self) -> str:
        return f"{self.name}: {self.accepted} accepted, {len(self.rejected)} rejected"


def _ingest(rows: Iterable[tuple[int, object]], parser, name, max_bad=MAX_MALFORMED_FRACTION):
    report = IngestReport(name)
    out = []
    for lineno, obj in rows:
        try:
            if isinstance(obj, Exception):
                raise obj
            out.append(parser(obj))
        except (ValueError, TypeError, KeyError) as exc:
            report.rejected.append((lineno, str(exc)))
        else:
            report.accepted += 1
    if max_bad is not None and report.total and len(report.rejected) > max_bad * report.total:
        first = report.rejected[0]
        raise IngestionError(
            f"{name}: {len(report.rejected)} of {report.total} lines malformed "
            f"(first at line {first[0]}: {first[1]})"
        )
    return out, report


def _jsonl_rows(lines):
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, ValueError(f"invalid JSON ({exc.msg})")


def _csv_rows(lines):
    reader = csv.DictReader(lines)
    for row in reader:
        yield reader.line_num, {k: v for k, v in row.items() if k is not None and v not in (None, "")}


class EventStore:
    """Immutable batch of ingested telemetry."""

    def __init__(self, games=(), clicks=(), recs=(), reports=()):
        self.games: tuple[GameEvent, ...] = tuple(games)
        self.clicks: tuple[ClickEvent, ...] = tuple(clicks)
        self.recs: tuple[RecommendationRecord, ...] = tuple(
            sorted(recs, key=lambda r: (r.child_id, r.generated_at)))
        self.reports: tuple[IngestReport, ...] = tuple(reports)
        self._games_by_child = None

    def games_by_child(self) -> dict[str, list[GameEvent]]:
        if self._games_by_child is None:
            idx = defaultdict(list)
            for g in self.games:
                idx[g.child_id].append(g)
            self._games_by_child = dict(idx)
        return self._games_by_child

    def recs_by_child(self) -> dict[str, list[RecommendationRecord]]:
        idx = defaultdict(list)
        for r in self.recs:
            idx[r.child_id].append(r)
        return dict(idx)

    def game_view(self) -> "GameView":
        return GameView(self.games)


def ingest_events(games: Iterable[str] = (), clicks: Iterable[str] = (), recs: Iterable[str] = (),
                  games_format: str = "jsonl",
                  max_malformed_fraction: float | None = MAX_MALFORMED_FRACTION) -> EventStore:
    """Parse the three telemetry streams into an :class:`EventStore`.

    Malformed lines are recorded with their 1-based line number and skipped.
    A stream with more than ``max_malformed_fraction`` malformed lines raises
    :class:`IngestionError`; ``None`` never fails.
    """
    if games_format == "csv":
        game_rows = _csv_rows(games)
    elif games_format == "jsonl":
        game_rows = _jsonl_rows(games)
    else:
        raise ValidationError(f"unknown games format {games_format!r}")
    g, gr = _ingest(game_rows, parse_game, "games", max_malformed_fraction)
    c, cr = _ingest(_jsonl_rows(clicks), parse_click, "clicks", max_malformed_fraction)
    r, rr = _ingest(_jsonl_rows(recs), parse_recommendation, "recs", max_malformed_fraction)
    return EventStore(g, c, r, (gr, cr, rr))


# -- qualified views ----------------------------------------------------------

def _epoch(ts: datetime) -> float:
    return ts.timestamp()


class GameView:
    """Immutable multiset of game events with columnar indexes."""

    def __init__(self, events: Sequence[GameEvent]):
        self.events: tuple[GameEvent, ...] = tuple(events)
        self.child_ids: list[str] = sorted({e.child_id for e in self.events})
        self.app_ids: list[str] = sorted({e.app_id for e in self.events})
        cpos = {c: i for i, c in enumerate(self.child_ids)}
        apos = {a: i for i, a in enumerate(self.app_ids)}
        n = len(self.events)
        self.child_code = np.fromiter((cpos[e.child_id] for e in self.events), np.int64, n)
        self.app_code = np.fromiter((apos[e.app_id] for e in self.events), np.int64, n)
        self.start = np.fromiter((_epoch(e.start_time) for e in self.events), np.float64, n)
        self.duration = np.fromiter((e.duration_s for e in self.events), np.float64, n)
        self._pairs = None
        self._app_counts = None

    def __len__(self):
        return len(self.events)

    def __eq__(self, other):
        return isinstance(other, GameView) and self.events == other.events

    def _subset(self, mask) -> "GameView":
        return GameView([e for e, keep in zip(self.events, mask) if keep])

    def between(self, start: datetime | None, end: datetime | None) -> "GameView":
        """Events with ``start <= start_time < end``."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.start >= _epoch(start)
        if end is not None:
            mask &= self.start < _epoch(end)
        return self._subset(mask)

    def pairs(self) -> dict[tuple[str, str], tuple[int, float]]:
        if self._pairs is None:
            acc: dict = defaultdict(lambda: [0, 0.0])
            for e in self.events:
                cell = acc[(e.child_id, e.app_id)]
                cell[0] += 1
                cell[1] += e.duration_s
            self._pairs = {k: (v[0], v[1]) for k, v in acc.items()}
        return self._pairs

    def app_counts(self) -> dict[str, int]:
        if self._app_counts is None:
            counts = np.bincount(self.app_code, minlength=len(self.app_ids))
            self._app_counts = {a: int(k) for a, k in zip(self.app_ids, counts)}
        return self._app_counts

    def played_apps(self, child_id: str) -> set[str]:
        return {a for (c, a) in self.pairs() if c == child_id}


def qualifying_games(source, policy: QualificationPolicy) -> GameView:
    """Duration-window filter, then drop every (child, app) pair over the play cap."""
    view = source.game_view() if isinstance(source, EventStore) else source
    mask = (view.duration >= policy.min_duration_s) & (view.duration <= policy.max_duration_s)
    if policy.max_plays_per_pair is not None and mask.any():
        n_apps = max(len(view.app_ids), 1)
        pair = view.child_code * n_apps + view.app_code
        kept = pair[mask]
        uniq, counts = np.unique(kept, return_counts=True)
        over = uniq[counts > policy.max_plays_per_pair]
        mask &= ~np.isin(pair, over)
    return view._subset(mask)


def games_count(view: GameView, app_id: str) -> int:
    return view.app_counts().get(app_id, 0)


def pair_stats(view: GameView, child_id: str, app_id: str) -> tuple[int, float]:
    return view.pairs().get((child_id, app_id), (0, 0.0))


# -- writers ------------------------------------------------------------------

def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_json() if hasattr(r, "to_json") else r, sort_keys=True))
            fh.write("\n")
