"""Popular, collaborative-filtering and random strategies plus ribbon assembly."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Sequence

import numpy as np

from . import kernels
from .catalog import (Catalog, ChildProfile, Strategy, ValidationError,
                      eligible_apps)
from .events import GameView, RecommendationRecord, RibbonSlot

log = logging.getLogger(__name__)

# ties are decided on values rounded to this many decimals
_TIE_DECIMALS = 9
# admits similarities that equal the threshold up to float error
_SIM_EPS = 1e-9


@dataclass(frozen=True)
class RecommenderConfig:
    k: int = 3
    ribbon_size: int = 7
    neighborhood_cap: int = 100
    min_similarity: float = 0.5
    age_weight: float = 0.4
    jaccard_weight: float = 0.6
    intensive_min_plays: int = 10
    intensive_min_duration_s: float = 60.0
    popularity_min_duration_s: float = 5.0
    outlier_filters: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.k <= self.ribbon_size <= 7:
            raise ValidationError(f"need 0 <= k <= ribbon_size <= 7, got k={self.k}, ribbon_size={self.ribbon_size}")
        if abs(self.age_weight + self.jaccard_weight - 1.0) > 1e-12:
            raise ValidationError("age_weight + jaccard_weight must equal 1")
        if min(self.age_weight, self.jaccard_weight) < 0:
            raise ValidationError("similarity weights must be nonnegative")
        if self.neighborhood_cap < 1:
            raise ValidationError("neighborhood_cap must be >= 1")


@dataclass(frozen=True)
class PopularityScore:
    app_id: str
    games: int
    age_days: int
    score: float


@dataclass(frozen=True)
class IntensiveAppSet:
    child_id: str
    apps: frozenset[str]


@dataclass(frozen=True)
class SimilarityScore:
    pair: tuple[str, str]
    sim_age: float
    jaccard: float
    sim: float


@dataclass(frozen=True)
class Neighborhood:
    target: str
    members: tuple[tuple[str, float], ...] = ()

    def __len__(self):
        return len(self.members)

    @property
    def ids(self) -> list[str]:
        return [c for c, _ in self.members]


@dataclass(frozen=True)
class InterestScore:
    app_id: str
    interest: float


class UsageMatrix:
    """Dense child x app play counts and summed durations of a qualified view."""

    def __init__(self, child_ids: Sequence[str], app_ids: Sequence[str], counts=None, durations=None):
        self.child_ids = list(child_ids)
        self.app_ids = list(app_ids)
        self.row = {c: i for i, c in enumerate(self.child_ids)}
        self.col = {a: j for j, a in enumerate(self.app_ids)}
        shape = (len(self.child_ids), len(self.app_ids))
        self.counts = np.zeros(shape, np.int64) if counts is None else np.asarray(counts, np.int64)
        self.durations = np.zeros(shape) if durations is None else np.asarray(durations, np.float64)
        if self.counts.shape != shape or self.durations.shape != shape:
            raise ValueError("counts/durations shape does not match ids")

    @classmethod
    def from_view(cls, view: GameView, child_ids=None, app_ids=None) -> "UsageMatrix":
        child_ids = view.child_ids if child_ids is None else list(child_ids)
        app_ids = view.app_ids if app_ids is None else list(app_ids)
        m = cls(child_ids, app_ids)
        rmap = np.array([m.row.get(c, -1) for c in view.child_ids], dtype=np.int64)
        cmap = np.array([m.col.get(a, -1) for a in view.app_ids], dtype=np.int64)
        if len(view):
            r = rmap[view.child_code]
            c = cmap[view.app_code]
            ok = (r >= 0) & (c >= 0)
            np.add.at(m.counts, (r[ok], c[ok]), 1)
            np.add.at(m.durations, (r[ok], c[ok]), view.duration[ok])
        return m

    def add_game(self, child_id: str, app_id: str, duration_s: float):
        i, j = self.row[child_id], self.col[app_id]
        self.counts[i, j] += 1
        self.durations[i, j] += duration_s

    def copy(self) -> "UsageMatrix":
        return UsageMatrix(self.child_ids, self.app_ids, self.counts.copy(), self.durations.copy())

    def played(self) -> np.ndarray:
        return self.counts > 0

    def intensive(self, min_plays=10, min_duration_s=60.0) -> np.ndarray:
        return (self.counts >= min_plays) & (self.durations >= min_duration_s)

    def app_games(self) -> dict[str, int]:
        totals = self.counts.sum(axis=0)
        return {a: int(totals[j]) for j, a in enumerate(self.app_ids)}


def as_usage(view) -> UsageMatrix:
    if isinstance(view, UsageMatrix):
        return view
    if isinstance(view, GameView):
        return UsageMatrix.from_view(view)
    raise TypeError(f"expected GameView or UsageMatrix, got {type(view).__name__}")


# -- popular ------------------------------------------------------------------

def app_age_days(published: date, as_of: date) -> int:
    if published > as_of:
        raise ValidationError(f"published_date {published} is after as_of {as_of}")
    return max(1, (as_of - published).days)


def popularity_ranking(view, catalog: Catalog, as_of: date) -> list[PopularityScore]:
    """Games per day since publication, for every catalog app.

    ``view`` must already be qualified with the popularity duration floor.
    Sorted by score descending, then app_id.
    """
    games = as_usage(view).app_games()
    scores = []
    for app in catalog:
        n = games.get(app.app_id, 0)
        age = app_age_days(app.published_date, as_of)
        scores.append(PopularityScore(app.app_id, n, age, n / age))
    scores.sort(key=lambda s: (-s.score, s.app_id))
    return scores


# -- collaborative filtering --------------------------------------------------

def age_similarity(a1: int, a2: int) -> float:
    gap = abs(a1 - a2)
    if gap == 0:
        return 1.0
    if gap == 1:
        return 0.5
    return 0.0


def intensive_apps(view, child_id: str, config: RecommenderConfig = RecommenderConfig()) -> IntensiveAppSet:
    usage = as_usage(view)
    if child_id not in usage.row:
        return IntensiveAppSet(child_id, frozenset())
    i = usage.row[child_id]
    mask = usage.intensive(config.intensive_min_plays, config.intensive_min_duration_s)[i]
    return IntensiveAppSet(child_id, frozenset(a for a, m in zip(usage.app_ids, mask) if m))


def child_similarity(c1: ChildProfile, c2: ChildProfile, intensive: dict,
                     config: RecommenderConfig = RecommenderConfig()) -> SimilarityScore:
    """Weighted age and intensive-app Jaccard similarity. Gender is ignored."""

    def apps(c):
        s = intensive.get(c.child_id, frozenset())
        return s.apps if isinstance(s, IntensiveAppSet) else frozenset(s)

    s1, s2 = apps(c1), apps(c2)
    union = len(s1 | s2)
    jac = len(s1 & s2) / union if union else 0.0
    s_age = age_similarity(c1.age, c2.age)
    return SimilarityScore((c1.child_id, c2.child_id), s_age, jac,
                           config.age_weight * s_age + config.jaccard_weight * jac)


def _population_arrays(target: ChildProfile, population: Sequence[ChildProfile], usage: UsageMatrix):
    """Rows for target + population (target first, deduplicated) drawn from ``usage``."""
    people = [target] + [p for p in population if p.child_id != target.child_id]
    rows = np.array([usage.row.get(p.child_id, -1) for p in people], dtype=np.int64)
    counts = np.zeros((len(people), len(usage.app_ids)), np.int64)
    durations = np.zeros_like(counts, dtype=np.float64)
    present = rows >= 0
    counts[present] = usage.counts[rows[present]]
    durations[present] = usage.durations[rows[present]]
    ages = np.array([p.age for p in people], dtype=np.int64)
    return people, ages, counts, durations


def build_neighborhood(target: ChildProfile, population: Sequence[ChildProfile], view,
                       config: RecommenderConfig = RecommenderConfig()) -> Neighborhood:
    """Most similar children that share at least one played app with ``target``."""
    usage = as_usage(view)
    people, ages, counts, durations = _population_arrays(target, population, usage)
    if len(people) < 2 or not counts[0].any():
        return Neighborhood(target.child_id)
    played = counts > 0
    intensive = (counts >= config.intensive_min_plays) & (durations >= config.intensive_min_duration_s)
    sims = kernels.similarity_row(0, ages, intensive, config.age_weight, config.jaccard_weight)
    shared = kernels.common_played(played, 0)
    keep = [i for i in range(1, len(people))
            if shared[i] > 0 and sims[i] >= config.min_similarity - _SIM_EPS]
    keep.sort(key=lambda i: (-round(float(sims[i]), _TIE_DECIMALS), people[i].child_id))
    members = tuple((people[i].child_id, float(sims[i])) for i in keep[: config.neighborhood_cap])
    return Neighborhood(target.child_id, members)


def cf_ranking(target: ChildProfile | str, neighborhood: Neighborhood, view,
               config: RecommenderConfig = RecommenderConfig()) -> list[InterestScore]:
    """Similarity-weighted neighbour play counts over |N|, for apps the target never played."""
    if not len(neighborhood):
        return []
    usage = as_usage(view)
    target_id = target if isinstance(target, str) else target.child_id
    n_apps = len(usage.app_ids)
    counts = np.zeros((len(neighborhood), n_apps), np.int64)
    for k, cid in enumerate(neighborhood.ids):
        if cid in usage.row:
            counts[k] = usage.counts[usage.row[cid]]
    sims = np.array([s for _, s in neighborhood.members])
    interest = kernels.interest_scores(sims, counts)
    candidate = counts.sum(axis=0) > 0
    if target_id in usage.row:
        candidate &= usage.counts[usage.row[target_id]] == 0
    out = [InterestScore(usage.app_ids[j], float(interest[j])) for j in np.flatnonzero(candidate)]
    out.sort(key=lambda s: (-round(s.interest, _TIE_DECIMALS), s.app_id))
    return out


# -- random -------------------------------------------------------------------

def random_ranking(eligible, seed: int) -> list[str]:
    """Uniform permutation of ``eligible``, reproducible per seed."""
    items = sorted(eligible)
    rng = np.random.default_rng(seed)
    return [items[i] for i in rng.permutation(len(items))]


# -- ribbon assembly ----------------------------------------------------------

@dataclass
class RecommenderContext:
    """Everything a strategy reads: catalog, population, and recommender-side usage."""

    catalog: Catalog
    population: list[ChildProfile]
    usage: UsageMatrix
    config: RecommenderConfig = field(default_factory=RecommenderConfig)


def strategy_candidates(child: ChildProfile, strategy: Strategy, ctx: RecommenderContext,
                        as_of: date) -> list[str]:
    """Ranked apps proposed by ``strategy`` for ``child``, before eligibility filtering.

    Popular proposes only apps with at least one counted game; an app nobody
    played carries no usage signal. Random proposes nothing: its slots come
    from the random fill.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.POPULAR:
        return [s.app_id for s in popularity_ranking(ctx.usage, ctx.catalog, as_of) if s.games > 0]
    if strategy is Strategy.CF:
        nb = build_neighborhood(child, ctx.population, ctx.usage, ctx.config)
        return [s.app_id for s in cf_ranking(child, nb, ctx.usage, ctx.config)]
    return []


def assemble_ribbon(child: ChildProfile, strategy: Strategy, ctx: RecommenderContext, seed: int,
                    generated_at: datetime) -> RecommendationRecord:
    """Top-k strategy survivors in the leading slots, random eligible fill after.

    Slots the strategy cannot fill fall back to random and are tagged so.
    """
    cfg = ctx.config
    eligible = eligible_apps(child, ctx.catalog)
    if not eligible:
        log.info("child %s has no eligible apps; empty ribbon", child.child_id)
        return RecommendationRecord(child.child_id, generated_at, ())
    strategy = Strategy(strategy)
    survivors = [a for a in strategy_candidates(child, strategy, ctx, generated_at.date()) if a in eligible]
    chosen = [(a, strategy) for a in survivors[: cfg.k]]
    taken = {a for a, _ in chosen}
    for a in random_ranking(eligible - taken, seed):
        if len(chosen) >= cfg.ribbon_size:
            break
        chosen.append((a, Strategy.RANDOM))
    slots = tuple(RibbonSlot(i + 1, a, src) for i, (a, src) in enumerate(chosen))
    return RecommendationRecord(child.child_id, generated_at, slots)
