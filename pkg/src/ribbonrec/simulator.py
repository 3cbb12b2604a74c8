"""Synthetic catalog, children and 45-day telemetry for desk-scale runs.

Behaviour model: each app has a power-law latent appeal and a target age;
a child's affinity for an app decays with the age gap. Active children get
one ribbon per day (built from usage before that day), click ribbon slots
chosen by position-bias weights, and play clicked apps more when affinity
is high. Organic plays outside the ribbon are drawn by affinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

from .catalog import (ARM_STRATEGY, AppRecord, Catalog, ChildProfile, ValidationError,
                      assign_group, derive_seed, dump_jsonl)
from .events import ClickEvent, GameEvent, QualificationPolicy, RecommendationRecord
from .recommenders import RecommenderConfig, RecommenderContext, UsageMatrix, assemble_ribbon

DAY_S = 86_400


@dataclass(frozen=True)
class SimConfig:
    num_children: int = 140
    num_apps: int = 30
    day_count: int = 45
    start_date: date = date(2018, 10, 15)
    age_weights: tuple[float, ...] = (1.0,) * 9
    popularity_skew: float = 1.0
    age_preference: float = 1.0
    position_bias: tuple[float, ...] = (1.0, 0.92, 0.71, 0.42, 0.63, 0.5, 0.46)
    taste_noise: float = 0.5
    sessions_per_day: float = 1.2
    clicks_per_session: float = 0.8
    games_per_click: float = 4.0
    organic_games_per_session: float = 4.0
    organic_focus: float = 3.0
    duration_median_s: float = 90.0
    duration_sigma: float = 1.1
    blacklist_rate: float = 0.05
    max_app_version: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("num_children", "num_apps", "day_count", "max_app_version"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if len(self.age_weights) != 9 or min(self.age_weights) < 0 or sum(self.age_weights) <= 0:
            raise ValidationError("age_weights needs 9 nonnegative weights (ages 2..10), not all zero")
        if len(self.position_bias) != 7 or min(self.position_bias) < 0 or sum(self.position_bias) <= 0:
            raise ValidationError("position_bias needs 7 nonnegative weights, not all zero")
        for name in ("sessions_per_day", "clicks_per_session", "games_per_click",
                     "organic_games_per_session", "duration_sigma", "popularity_skew",
                     "age_preference", "taste_noise", "organic_focus"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.duration_median_s <= 0:
            raise ValidationError("duration_median_s must be > 0")
        if not 0 <= self.blacklist_rate <= 1:
            raise ValidationError("blacklist_rate must be in [0, 1]")


@dataclass
class SimResult:
    catalog: Catalog
    children: list[ChildProfile]
    games: list[GameEvent] = field(default_factory=list)
    clicks: list[ClickEvent] = field(default_factory=list)
    recs: list[RecommendationRecord] = field(default_factory=list)

    def files(self) -> dict[str, str]:
        return {
            "apps.jsonl": dump_jsonl(a.to_json() for a in self.catalog),
            "children.jsonl": dump_jsonl(c.to_json() for c in self.children),
            "games.jsonl": dump_jsonl(g.to_json() for g in self.games),
            "clicks.jsonl": dump_jsonl(c.to_json() for c in self.clicks),
            "recs.jsonl": dump_jsonl(r.to_json() for r in self.recs),
        }

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in self.files().items():
            p = out / name
            p.write_text(text, encoding="utf-8")
            paths.append(p)
        return paths


def _make_catalog(cfg: SimConfig, rng) -> tuple[Catalog, np.ndarray, np.ndarray]:
    catalog = Catalog()
    width = len(str(cfg.num_apps))
    appeal = (np.arange(1, cfg.num_apps + 1) ** -cfg.popularity_skew)[rng.permutation(cfg.num_apps)]
    centres = np.empty(cfg.num_apps)
    tags = ("science", "spatial", "multiplayer", "logic", "literacy", "emotions", "arts")
    for j in range(cfg.num_apps):
        lo = int(rng.integers(2, 8))
        hi = min(10, lo + int(rng.integers(2, 7)))
        centres[j] = (lo + hi) / 2
        catalog.register(AppRecord(
            app_id=f"app{j + 1:0{width}d}",
            title=f"Game {j + 1}",
            category_tag=tags[j % len(tags)],
            min_age=lo,
            max_age=hi,
            published_date=cfg.start_date - timedelta(days=int(rng.integers(30, 721))),
            min_app_version=int(min(rng.geometric(0.6), cfg.max_app_version)),
            blacklisted=bool(rng.random() < cfg.blacklist_rate),
        ))
    return catalog.freeze(), appeal, centres


def _make_children(cfg: SimConfig, rng) -> list[ChildProfile]:
    width = len(str(cfg.num_children))
    p = np.asarray(cfg.age_weights, dtype=float)
    ages = rng.choice(np.arange(2, 11), size=cfg.num_children, p=p / p.sum())
    out = []
    for i in range(cfg.num_children):
        cid = f"child{i + 1:0{width}d}"
        out.append(ChildProfile(
            child_id=cid,
            age=int(ages[i]),
            app_version=int(rng.integers(1, cfg.max_app_version + 1)),
            gender=str(rng.choice(["f", "m"])),
            group=assign_group(cid, cfg.seed),
        ))
    return out


def _ts(day0: datetime, seconds: float) -> datetime:
    return day0 + timedelta(seconds=int(seconds))


def simulate(cfg: SimConfig = SimConfig(), rec_config: RecommenderConfig | None = None) -> SimResult:
    """Generate a deterministic world and its telemetry for ``cfg.day_count`` days."""
    rec_config = rec_config or RecommenderConfig(seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    catalog, appeal, centres = _make_catalog(cfg, rng)
    children = _make_children(cfg, rng)
    app_ids = catalog.app_ids()
    raw = UsageMatrix([c.child_id for c in children], app_ids)
    ctx = RecommenderContext(catalog, children, raw, rec_config)
    policy = QualificationPolicy.recommender(rec_config.popularity_min_duration_s, rec_config.outlier_filters)
    bias = np.asarray(cfg.position_bias, dtype=float)
    mu = math.log(cfg.duration_median_s)
    version_ok = {c.child_id: np.array([catalog[a].min_app_version <= c.app_version
                                        and not catalog[a].blacklisted for a in app_ids])
                  for c in children}
    taste = {c.child_id: rng.lognormal(0.0, cfg.taste_noise, size=len(app_ids)) for c in children}
    result = SimResult(catalog, children)

    def affinity(child):
        return appeal * taste[child.child_id] * np.exp(-cfg.age_preference * np.abs(centres - child.age))

    def play(child, app_id, n, t, day_end, todays):
        for _ in range(n):
            dur = float(round(rng.lognormal(mu, cfg.duration_sigma), 3))
            if t >= day_end:
                break
            g = GameEvent(child.child_id, app_id, _ts(day0, t), dur)
            result.games.append(g)
            todays.append(g)
            t += dur + float(rng.integers(5, 60))
        return t

    for d in range(cfg.day_count):
        day0 = datetime.combine(cfg.start_date + timedelta(days=d), time(0), tzinfo=timezone.utc)
        todays: list[GameEvent] = []
        for child in children:
            n_sessions = int(rng.poisson(cfg.sessions_per_day))
            if not n_sessions:
                continue
            starts = np.sort(rng.uniform(0, DAY_S - 3600, size=n_sessions))
            rib = assemble_ribbon(child, ARM_STRATEGY[child.group], ctx,
                                  derive_seed(cfg.seed, "ribbon", child.child_id, d),
                                  _ts(day0, starts[0]))
            result.recs.append(rib)
            aff = affinity(child)
            pool = aff ** cfg.organic_focus * version_ok[child.child_id]
            for s0 in starts:
                t = max(float(s0), rib.generated_at.timestamp() - day0.timestamp())
                session_end = min(t + 3600.0, DAY_S - 1.0)
                if rib.slots:
                    w = bias[: len(rib.slots)]
                    for _ in range(int(rng.poisson(cfg.clicks_per_session))):
                        pos = int(rng.choice(len(w), p=w / w.sum())) + 1
                        app_id = rib.slots[pos - 1].app_id
                        result.clicks.append(ClickEvent(child.child_id, app_id, pos, _ts(day0, t)))
                        rel = aff[app_ids.index(app_id)] / aff.max()
                        n_games = 1 + int(rng.poisson(cfg.games_per_click * rel))
                        t = play(child, app_id, n_games, t + 2.0, session_end, todays)
                n_org = int(rng.poisson(cfg.organic_games_per_session))
                if n_org and pool.sum() > 0:
                    picks = rng.choice(len(app_ids), size=n_org, p=pool / pool.sum())
                    for j in picks:
                        t = play(child, app_ids[j], 1, t, session_end, todays)
        # usage visible to tomorrow's ribbons
        for g in todays:
            if policy.min_duration_s <= g.duration_s <= policy.max_duration_s:
                raw.add_game(g.child_id, g.app_id, g.duration_s)
        if policy.max_plays_per_pair is not None:
            capped = raw.copy()
            over = capped.counts > policy.max_plays_per_pair
            capped.counts[over] = 0
            capped.durations[over] = 0.0
            ctx.usage = capped
    result.games.sort(key=lambda g: (g.start_time, g.child_id, g.app_id))
    result.clicks.sort(key=lambda c: (c.timestamp, c.child_id, c.position))
    result.recs.sort(key=lambda r: (r.generated_at, r.child_id))
    return result
