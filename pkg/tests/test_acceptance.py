"""Acceptance suite: one PASS/FAIL line per criterion (run with -s to see them inline)."""
import time
from collections import Counter
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from scipy.stats import chisquare

import oracles
from ribbonrec.catalog import ARM_STRATEGY, ExperimentGroup, Strategy, assign_group, eligible_apps
from ribbonrec.cli import main
from ribbonrec.evaluation import (PUBLISHED_CLICKS, PUBLISHED_MEANS, ExposureLedger, SplitWindows,
                                  click_position_analysis, engagement_metrics, f1_score, levene_test,
                                  lilliefors_test, student_t, wilcoxon_rank_sum)
from ribbonrec.evaluation.clicks import round_half_up
from ribbonrec.evaluation.report import arm_confusion, day_start
from ribbonrec.events import EventStore, GameView, QualificationPolicy, qualifying_games
from ribbonrec.recommenders import (RecommenderConfig, RecommenderContext, UsageMatrix, age_similarity,
                                    assemble_ribbon, build_neighborhood, cf_ranking, popularity_ranking,
                                    strategy_candidates)
from ribbonrec.simulator import SimConfig, simulate
from scenarios import AS_OF, random_catalog, random_children, random_games, random_world

REC_POLICY = QualificationPolicy.recommender()


def test_c01_click_table(criterion):
    t = time.perf_counter()
    rep = click_position_analysis(PUBLISHED_CLICKS, PUBLISHED_MEANS)
    elapsed = time.perf_counter() - t
    flags = {f["mean"]: f for f in rep.flags}
    ok = (rep.rank == [1, 2, 3, 7, 4, 5, 6]
          and round_half_up(rep.mean_hidden) == 3044
          and abs(rep.mean_visible - 4655.6) < 1e-9
          and flags["visible"]["consistent"] is False and flags["visible"]["reference"] == 4830
          and flags["hidden"]["consistent"] is True
          and elapsed < 1.0)
    criterion(1, "click-position ranks and means", ok,
              f"rank={tuple(rep.rank)} visible={rep.mean_visible:.1f} vs printed 4830 flagged, "
              f"hidden={rep.mean_hidden} -> {round_half_up(rep.mean_hidden)}, {elapsed * 1e3:.2f} ms")


def test_c02_f1_consistency(criterion):
    t = time.perf_counter()
    rows = {"cf": ((0.0740, 0.0128), 2.18), "popular": ((0.1293, 0.0330), 5.26), "random": ((0.0664, 0.0357), 4.64)}
    got = {k: 100 * f1_score(*pr) for k, (pr, _) in rows.items()}
    elapsed = time.perf_counter() - t
    ok = all(abs(got[k] - want) <= 0.02 for k, (_, want) in rows.items()) and elapsed < 1.0
    criterion(2, "F1 from published precision/recall", ok,
              ", ".join(f"{k}={v:.3f}%" for k, v in got.items()))


def test_c03_age_similarity_exhaustive(criterion):
    bad = []
    for a in range(2, 11):
        for b in range(2, 11):
            want = 1.0 if a == b else 0.5 if abs(a - b) == 1 else 0.0
            if age_similarity(a, b) != want:
                bad.append((a, b))
    criterion(3, "age similarity over all 81 pairs", not bad, f"{81 - len(bad)}/81 match")


def test_c04_cf_oracle(criterion):
    t = time.perf_counter()
    instances = targets = nonempty = mismatches = 0
    worst = 0.0
    for seed in range(250):
        _, kids, games = random_world(10_000 + seed, max_children=10, max_apps=8)
        view = qualifying_games(GameView(games), REC_POLICY)
        instances += 1
        for target in kids:
            targets += 1
            nb = build_neighborhood(target, kids, view)
            want = oracles.neighborhood(target, kids, games)
            if nb.ids != [c for c, _ in want]:
                mismatches += 1
                continue
            for (_, s), (_, w) in zip(nb.members, want):
                worst = max(worst, abs(s - float(w)))
            nonempty += bool(want)
            got = cf_ranking(target, nb, view)
            want_cf = oracles.cf_interest(target, want, games)
            if [s.app_id for s in got] != [a for a, _ in want_cf]:
                mismatches += 1
            elif any(abs(s.interest - float(w)) > 1e-12 for s, (_, w) in zip(got, want_cf)):
                mismatches += 1
    elapsed = time.perf_counter() - t
    ok = instances >= 200 and mismatches == 0 and worst <= 1e-12 and nonempty > 100 and elapsed < 30
    criterion(4, "CF neighbourhoods and rankings vs brute force", ok,
              f"{instances} instances, {targets} targets, {nonempty} non-empty neighbourhoods, "
              f"max sim error {worst:.1e}, {mismatches} mismatches, {elapsed:.1f} s")


def test_c05_popularity_oracle(criterion):
    mismatches = short = fresh = 0
    for seed in range(250):
        rng = np.random.default_rng(20_000 + seed)
        cat = random_catalog(rng, int(rng.integers(1, 9)), published_near=bool(seed % 2))
        kids = random_children(rng, int(rng.integers(1, 8)))
        games = random_games(rng, kids, cat.app_ids(), density=float(rng.uniform(0.1, 0.9)))
        short += sum(g.duration_s < 5 for g in games)
        fresh += sum(a.published_date >= AS_OF - timedelta(days=1) for a in cat)
        got = popularity_ranking(qualifying_games(GameView(games), REC_POLICY), cat, AS_OF)
        want = oracles.popularity(games, list(cat), AS_OF)
        if [(s.app_id, s.games, s.age_days) for s in got] != [r[:3] for r in want] \
                or [s.score for s in got] != [float(r[3]) for r in want]:
            mismatches += 1
    ok = mismatches == 0 and short > 0 and fresh > 0
    criterion(5, "popularity ranking vs brute force", ok,
              f"250 logs, {short} sub-5 s games, {fresh} apps on the age floor, {mismatches} mismatches")


def test_c06_ribbon_properties(criterion):
    gen_at = datetime.combine(AS_OF, datetime.min.time(), tzinfo=timezone.utc)
    violations = Counter()
    checked_top = empty_cf = 0
    strategies = list(Strategy)
    for seed in range(1000):
        rng = np.random.default_rng(30_000 + seed)
        cat = random_catalog(rng, int(rng.integers(1, 21)), blacklist_p=0.2)
        kids = random_children(rng, int(rng.integers(1, 12)), ages=range(2, 11))
        games = random_games(rng, kids, cat.app_ids(), density=float(rng.uniform(0.1, 0.9)))
        view = qualifying_games(GameView(games), REC_POLICY)
        usage = UsageMatrix.from_view(view, [k.child_id for k in kids], cat.app_ids())
        ctx = RecommenderContext(cat, kids, usage, RecommenderConfig())
        child = kids[int(rng.integers(0, len(kids)))]
        strategy = strategies[seed % 3]
        rib = assemble_ribbon(child, strategy, ctx, seed, gen_at)
        ids = rib.app_ids
        for a in ids:
            app = cat[a]
            if app.blacklisted:
                violations["blacklisted"] += 1
            if app.min_app_version > child.app_version:
                violations["version"] += 1
            if not app.min_age <= child.age <= app.max_age:
                violations["age"] += 1
        if len(ids) != len(set(ids)):
            violations["duplicate"] += 1
        if len(ids) > 7:
            violations["length"] += 1
        eligible = eligible_apps(child, cat)
        if len(ids) != min(7, len(eligible)):
            violations["fill"] += 1
        survivors = [a for a in strategy_candidates(child, strategy, ctx, AS_OF) if a in eligible]
        if len(survivors) >= 3:
            checked_top += 1
            if ids[:3] != survivors[:3] or any(s.source is not strategy for s in rib.slots[:3]):
                violations["top3"] += 1
        if strategy is Strategy.CF and len(build_neighborhood(child, kids, usage)) == 0:
            empty_cf += 1
            if any(s.source is not Strategy.RANDOM for s in rib.slots):
                violations["cf-fallback"] += 1
    ok = not violations and checked_top > 50 and empty_cf > 20
    criterion(6, "ribbon property suite", ok,
              f"1000 scenarios, {checked_top} with >=3 survivors, {empty_cf} empty-neighbourhood CF ribbons, "
              f"violations={dict(violations) or 0}")


def test_c07_metrics_recount(criterion):
    policy = QualificationPolicy.evaluation()
    compared = users = children_checked = bad = 0
    for seed in (1, 2):
        sim = simulate(SimConfig(num_children=200, num_apps=25, day_count=20, seed=seed))
        end = day_start(date(2018, 11, 4))
        view = qualifying_games(GameView(sim.games), policy).between(None, end)
        windows = SplitWindows(date(2018, 10, 15), date(2018, 10, 27), date(2018, 10, 28), date(2018, 11, 3))
        store = EventStore(sim.games, sim.clicks, sim.recs)
        test_plays = {}
        for e in qualifying_games(store, policy).between(day_start(windows.test_start), end).events:
            test_plays.setdefault(e.child_id, set()).add(e.app_id)
        for arm, strategy in ARM_STRATEGY.items():
            kids = [c for c in sim.children if c.group is arm]
            ids = [c.child_id for c in kids]
            for attribution in ("slot", "arm"):
                rep = engagement_metrics(ExposureLedger(sim.recs, ids, end), view, arm, strategy, attribution)
                want_g, want_t = oracles.engagement_join(sim.recs, view.events, ids, strategy, end, attribution)
                compared += 1
                users += len(want_g)
                exact = rep.games_per_user == want_g and rep.time_per_user.keys() == want_t.keys() \
                    and all(abs(rep.time_per_user[k] - want_t[k]) <= 1e-9 * max(1.0, want_t[k]) for k in want_t)
                if want_g:
                    exact &= rep.ang == sum(want_g.values()) / len(want_g)
                bad += not exact
            _, per_child = arm_confusion(kids, store, sim.catalog, strategy, windows, policy)
            train_hi = day_start(windows.train_end + timedelta(days=1))
            for c in kids:
                if c.child_id not in per_child:
                    continue
                recs = {s.app_id for r in sim.recs if r.child_id == c.child_id and r.generated_at < train_hi
                        for s in r.slots if s.source is strategy}
                universe = set(eligible_apps(c, sim.catalog)) | recs | test_plays.get(c.child_id, set())
                children_checked += 1
                bad += per_child[c.child_id].total != len(universe)
    ok = bad == 0 and users > 100 and children_checked > 100
    criterion(7, "engagement recount and confusion totals", ok,
              f"{compared} arm reports, {users} acting users, {children_checked} child matrices, {bad} mismatches")


def test_c08_statistics_calibration(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    trials, n, alpha = 2000, 100, 0.05
    lil = sum(lilliefors_test(rng.standard_normal(n)).pvalue < alpha for _ in range(trials)) / trials
    wil = sum(wilcoxon_rank_sum(rng.standard_normal(n), rng.standard_normal(n)).pvalue < alpha
              for _ in range(trials)) / trials
    exact = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6]).pvalue
    x = [1.0, 2.0, 4.0, 8.0, 9.0]
    lev = levene_test(x, x).statistic
    tt = student_t([1, 2, 3, 4, 5], [2, 4]).statistic
    elapsed = time.perf_counter() - t
    ok = (abs(lil - alpha) <= 0.02 and abs(wil - alpha) <= 0.02 and abs(exact - 0.1) < 1e-12
          and lev == 0 and tt == 0 and elapsed < 120)
    criterion(8, "test calibration and fixed points", ok,
              f"Lilliefors rejects {lil:.2%}, rank-sum rejects {wil:.2%} of {trials} nulls at n={n}; "
              f"exact p={exact:g}, Levene W={lev:g}, t={tt:g}, {elapsed:.1f} s")


def test_c09_end_to_end(criterion, tmp_path, capsys):
    import json
    t = time.perf_counter()
    codes, reports = [], []
    for run in ("r1", "r2"):
        data, out = tmp_path / run / "data", tmp_path / run / "eval"
        codes.append(main(["simulate", "--seed", "42", "--out", str(data)]))
        codes.append(main(["evaluate", "--seed", "42", "--data", str(data), "--out", str(out)]))
        reports.append((out / "report.json").read_bytes())
    elapsed = (time.perf_counter() - t) / 2
    capsys.readouterr()
    sections = set(json.loads(reports[0]))
    ok = (codes == [0] * 4 and {"engagement", "performance", "clicks", "significance"} <= sections
          and reports[0] == reports[1] and elapsed < 180)
    criterion(9, "simulate -> evaluate at defaults", ok,
              f"{elapsed:.1f} s per run, sections={sorted(sections)}, identical={reports[0] == reports[1]}")


def test_c10_group_uniformity(criterion):
    counts = Counter(assign_group(f"child-{i:05d}", 2018) for i in range(30_000))
    shares = {g.value: counts[g] / 30_000 for g in ExperimentGroup}
    p = chisquare([counts[g] for g in ExperimentGroup]).pvalue
    ok = all(abs(s - 1 / 3) <= 0.015 for s in shares.values()) and p > 0.01
    criterion(10, "group assignment uniformity", ok,
              ", ".join(f"{k}={v:.2%}" for k, v in shares.items()) + f", chi-square p={p:.3f}")
