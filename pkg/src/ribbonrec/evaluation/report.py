"""Full offline evaluation: engagement, confusion metrics, clicks, significance."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone

from ..catalog import (ARM_STRATEGY, Catalog, ChildProfile, ExperimentGroup, Strategy,
                       ValidationError, eligible_apps)
from ..events import EventStore, QualificationPolicy, qualifying_games
from .clicks import click_position_analysis, clicks_by_position
from .engagement import ExposureLedger, engagement_metrics
from .performance import ConfusionMatrix, confusion_for_child, performance_metrics
from .stats import ProtocolError, significance_protocol

TRAIN_SHARE = 30 / 45


def day_start(d: date) -> datetime:
    return datetime.combine(d, time(0), tzinfo=timezone.utc)


@dataclass(frozen=True)
class SplitWindows:
    """Inclusive calendar-day bounds for the train and test periods."""

    train_start: date
    train_end: date
    test_start: date
    test_end: date

    def __post_init__(self):
        if self.train_start > self.train_end:
            raise ValidationError(f"train window is empty: {self.train_start} > {self.train_end}")
        if self.test_start > self.test_end:
            raise ValidationError(f"test window is empty: {self.test_start} > {self.test_end}")
        if self.test_start <= self.train_end:
            raise ValidationError(
                f"test window ({self.test_start}..{self.test_end}) must start after the train "
                f"window ends ({self.train_end})"
            )

    @classmethod
    def from_span(cls, first: date, last: date) -> "SplitWindows":
        """First 30/45 of the days train, the rest test."""
        n_days = (last - first).days + 1
        if n_days < 2:
            raise ValidationError("log spans fewer than 2 days; cannot split train/test")
        n_train = min(max(1, round(n_days * TRAIN_SHARE)), n_days - 1)
        train_end = first + timedelta(days=n_train - 1)
        return cls(first, train_end, train_end + timedelta(days=1), last)

    def to_json(self) -> dict:
        return {k: getattr(self, k).isoformat() for k in
                ("train_start", "train_end", "test_start", "test_end")}


def log_span(store: EventStore) -> tuple[date, date]:
    stamps = [g.start_time for g in store.games] + [r.generated_at for r in store.recs]
    if not stamps:
        raise ValidationError("no games or recommendations to evaluate")
    return min(stamps).date(), max(stamps).date()


@dataclass
class EvaluationConfig:
    windows: SplitWindows | None = None
    alpha: float = 0.05
    attribution: str = "slot"
    policy: QualificationPolicy = field(default_factory=QualificationPolicy.evaluation)
    mc_iterations: int = 10_000
    seed: int = 0


def _arm_children(children: list[ChildProfile]) -> dict[ExperimentGroup, list[ChildProfile]]:
    arms = {g: [] for g in ExperimentGroup}
    for c in children:
        if c.group is not None:
            arms[c.group].append(c)
    return arms


def _recommended(rec, strategy: Strategy, attribution: str) -> set[str]:
    return {s.app_id for s in rec.slots if attribution == "arm" or s.source is strategy}


def arm_confusion(children, store: EventStore, catalog: Catalog, strategy: Strategy,
                  windows: SplitWindows, policy: QualificationPolicy, attribution="slot"):
    """Summed per-child matrices for children with a ribbon in the train window.

    The universe is the child's eligible set, widened by any recommended or
    played app outside it so every counted app has a cell.
    """
    train_lo, train_hi = day_start(windows.train_start), day_start(windows.train_end + timedelta(days=1))
    test_lo, test_hi = day_start(windows.test_start), day_start(windows.test_end + timedelta(days=1))
    test_view = qualifying_games(store, policy).between(test_lo, test_hi)
    plays_by_child: dict[str, set] = {}
    for e in test_view.events:
        plays_by_child.setdefault(e.child_id, set()).add(e.app_id)
    recs_by_child = store.recs_by_child()
    total = ConfusionMatrix()
    per_child = {}
    for child in children:
        train_recs = [r for r in recs_by_child.get(child.child_id, [])
                      if train_lo <= r.generated_at < train_hi]
        if not train_recs:
            continue
        recs = set().union(*(_recommended(r, strategy, attribution) for r in train_recs))
        plays = plays_by_child.get(child.child_id, set())
        universe = set(eligible_apps(child, catalog)) | recs | plays
        m = confusion_for_child(recs, plays, universe)
        per_child[child.child_id] = m
        total = total + m
    return total, per_child


def _protocol_or_error(a, b, cfg: EvaluationConfig) -> dict:
    try:
        return significance_protocol(a, b, cfg.alpha, cfg.mc_iterations, cfg.seed).to_json()
    except ProtocolError as exc:
        return {"error": str(exc), "branch": exc.branch, "n_a": len(a), "n_b": len(b)}


def evaluate(catalog: Catalog, children: list[ChildProfile], store: EventStore,
             cfg: EvaluationConfig | None = None) -> dict:
    """Run every evaluation section and return the JSON-ready report."""
    cfg = cfg or EvaluationConfig()
    windows = cfg.windows or SplitWindows.from_span(*log_span(store))
    period_end = day_start(windows.test_end + timedelta(days=1))
    view = qualifying_games(store, cfg.policy).between(None, period_end)
    arms = _arm_children(children)

    engagement, performance, samples = {}, {}, {}
    for arm, kids in arms.items():
        strategy = ARM_STRATEGY[arm]
        ids = [c.child_id for c in kids]
        ledger = ExposureLedger(store.recs, ids, period_end)
        eng = engagement_metrics(ledger, view, arm, strategy, cfg.attribution)
        engagement[arm.value] = eng.to_json()
        samples[arm.value] = (list(eng.games_per_user.values()), list(eng.time_per_user.values()))
        total, per_child = arm_confusion(kids, store, catalog, strategy, windows, cfg.policy,
                                         cfg.attribution)
        performance[arm.value] = {"strategy": strategy.value, "children": len(per_child),
                                  "confusion": total.to_json(),
                                  "metrics": performance_metrics(total).to_json()}

    significance = {"alpha": cfg.alpha, "games": {}, "time": {}}
    for a, b in itertools.combinations([g.value for g in ExperimentGroup], 2):
        key = f"{a}_vs_{b}"
        significance["games"][key] = _protocol_or_error(samples[a][0], samples[b][0], cfg)
        significance["time"][key] = _protocol_or_error(samples[a][1], samples[b][1], cfg)

    return {
        "windows": windows.to_json(),
        "engagement": engagement,
        "performance": performance,
        "clicks": click_position_analysis(clicks_by_position(store.clicks)).to_json(),
        "significance": significance,
    }


# -- text rendering ---------------------------------------------------------------

def _pct(v):
    return "   n/a" if v is None else f"{100 * v:6.2f}"


def _num(v, fmt="{:.2f}"):
    return "n/a" if v is None else fmt.format(v)


def render_text(report: dict, arm: str | None = None) -> str:
    """Plain-text tables: clicks by position, engagement, performance, tests."""
    arms = [arm] if arm else sorted(report["engagement"])
    out = []
    ck = report["clicks"]
    out.append("Accumulated click-through by position")
    out.append("Position  " + " ".join(f"{p:>7}" for p in range(1, 6)) + "  |" +
               " ".join(f"{p:>7}" for p in (6, 7)))
    out.append("Clicks    " + " ".join(f"{c:>7}" for c in ck["clicks"][:5]) + "  |" +
               " ".join(f"{c:>7}" for c in ck["clicks"][5:]))
    out.append(f"Mean      visible {ck['mean_visible']:.1f}   hidden {ck['mean_hidden']:.1f}")
    out.append("Rank      " + " ".join(f"{r:>7}" for r in ck["rank"][:5]) + "  |" +
               " ".join(f"{r:>7}" for r in ck["rank"][5:]))
    for f in ck.get("flags", []):
        if not f["consistent"]:
            out.append(f"  note: {f['mean']} mean computes to {f['computed']:.1f}, reference {f['reference']}")
    out.append("")
    out.append("Engagement metrics by recommender")
    out.append(f"{'':8}{'':10}{'Mean':>12}{'Median':>12}{'Variance':>16}{'Users':>8}")
    for label, m, med, var in (("Games", "ang", "median_games", "variance_games"),
                               ("Time", "agt", "median_time", "variance_time")):
        out.append(label)
        for a in arms:
            e = report["engagement"][a]
            out.append(f"{'':8}{e['strategy']:<10}{_num(e[m]):>12}{_num(e[med]):>12}"
                       f"{_num(e[var], '{:,.2f}'):>16}{e['num_users']:>8}")
    out.append("")
    out.append("Performance metrics (%)")
    out.append(f"{'Algorithm':<12}{'Accuracy':>10}{'Precision':>11}{'Recall':>9}{'F1':>9}")
    for a in arms:
        p = report["performance"][a]
        m = p["metrics"]
        out.append(f"{p['strategy']:<12}{_pct(m['accuracy']):>10}{_pct(m['precision']):>11}"
                   f"{_pct(m['recall']):>9}{_pct(m['f1']):>9}")
    out.append("")
    sig = report["significance"]
    out.append(f"Significance (alpha={sig['alpha']:g})")
    for metric in ("games", "time"):
        for key, r in sorted(sig[metric].items()):
            if arm and arm not in key.split("_vs_"):
                continue
            if "error" in r:
                out.append(f"  {metric:<6}{key:<8} not tested: {r['error']}")
            else:
                marks = ", ".join(f"{lvl}:{'reject' if v else 'accept'}" for lvl, v in r["reject_at"].items())
                out.append(f"  {metric:<6}{key:<8} {r['branch']:<9} stat={r['statistic']:.4g} "
                           f"p={r['pvalue']:.4g} ({marks})")
    return "\n".join(out) + "\n"
