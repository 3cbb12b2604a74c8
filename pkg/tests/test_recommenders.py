from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ribbonrec.catalog import (AppRecord, Catalog, ChildProfile, Strategy, ValidationError,
                               eligible_apps)
from ribbonrec.events import GameEvent, GameView, QualificationPolicy, qualifying_games
from ribbonrec.recommenders import (IntensiveAppSet, Neighborhood, RecommenderConfig,
                                    RecommenderContext, UsageMatrix, age_similarity,
                                    assemble_ribbon, build_neighborhood, cf_ranking,
                                    child_similarity, intensive_apps, popularity_ranking,
                                    random_ranking, strategy_candidates)
from scenarios import AS_OF, T0, random_world

GEN_AT = datetime.combine(AS_OF, datetime.min.time(), tzinfo=timezone.utc)


def app(app_id, published, lo=2, hi=10, version=1, blacklisted=False):
    return AppRecord(app_id, app_id, "arts", lo, hi, published, version, blacklisted)


def plays(child, app_id, n, dur=10.0):
    return [GameEvent(child, app_id, T0 + timedelta(minutes=i), dur) for i in range(n)]


def rec_view(games):
    return qualifying_games(GameView(games), QualificationPolicy.recommender())


# -- popularity ------------------------------------------------------------------

def test_popularity_direct_arithmetic():
    cat = Catalog().register(app("a", AS_OF - timedelta(days=50)))
    [s] = popularity_ranking(rec_view(plays("c", "a", 100)), cat, AS_OF)
    assert (s.games, s.age_days, s.score) == (100, 50, 2.0)


def test_popularity_publish_day_floor():
    cat = Catalog().register(app("a", AS_OF))
    [s] = popularity_ranking(rec_view(plays("c", "a", 3)), cat, AS_OF)
    assert (s.age_days, s.score) == (1, 3.0)


def test_popularity_tie_break_by_id():
    cat = Catalog().register(app("Y", AS_OF - timedelta(days=2))).register(app("X", AS_OF - timedelta(days=5)))
    ranking = popularity_ranking(rec_view(plays("c", "X", 10) + plays("c", "Y", 4)), cat, AS_OF)
    assert [s.app_id for s in ranking] == ["X", "Y"] and ranking[0].score == ranking[1].score == 2.0


def test_popularity_ignores_short_games():
    cat = Catalog().register(app("a", AS_OF - timedelta(days=1)))
    games = plays("c", "a", 3, dur=4.0) + plays("c", "a", 2, dur=5.0)
    assert popularity_ranking(rec_view(games), cat, AS_OF)[0].games == 2


def test_popularity_rejects_future_publish():
    cat = Catalog().register(app("a", AS_OF + timedelta(days=1)))
    with pytest.raises(ValidationError):
        popularity_ranking(rec_view([]), cat, AS_OF)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=8), st.lists(st.integers(0, 90), min_size=8, max_size=8),
       st.integers(2, 5))
def test_popularity_order_scale_free(counts, ages, factor):
    cat = Catalog()
    for j, _ in enumerate(counts):
        cat.register(app(f"a{j}", AS_OF - timedelta(days=ages[j])))
    base = [g for j, n in enumerate(counts) for g in plays("c", f"a{j}", n)]
    scaled = [g for j, n in enumerate(counts) for g in plays("c", f"a{j}", n * factor)]
    order = [s.app_id for s in popularity_ranking(rec_view(base), cat, AS_OF)]
    order_scaled = [s.app_id for s in popularity_ranking(rec_view(scaled), cat, AS_OF)]
    assert order == order_scaled


@pytest.mark.parametrize("seed", range(40))
def test_popularity_matches_oracle(seed):
    cat, _, games = random_world(seed)
    got = popularity_ranking(rec_view(games), cat, AS_OF)
    want = oracles.popularity(games, list(cat), AS_OF)
    assert [(s.app_id, s.games, s.age_days) for s in got] == [r[:3] for r in want]
    assert [s.score for s in got] == [float(r[3]) for r in want]


# -- similarity ------------------------------------------------------------------

@pytest.mark.parametrize("a, b, want", [(5, 5, 1.0), (5, 6, 0.5), (7, 3, 0.0), (6, 5, 0.5), (2, 10, 0.0)])
def test_age_similarity(a, b, want):
    assert age_similarity(a, b) == want


def test_child_similarity_examples():
    c1, c2 = ChildProfile("c1", 5, 1), ChildProfile("c2", 5, 1)
    same = {"c1": {"x", "y"}, "c2": {"x", "y"}}
    assert child_similarity(c1, c2, same).sim == 1.0
    partial = {"c1": {"x", "y", "z"}, "c2": {"y", "z", "w"}}
    assert child_similarity(c1, c2, partial).sim == pytest.approx(0.4 + 0.6 * 0.5, abs=1e-15)
    far = ChildProfile("c3", 8, 1)
    assert child_similarity(c1, far, {"c1": {"x"}, "c3": {"y"}}).sim == 0.0
    assert child_similarity(c1, c2, {}).jaccard == 0.0


@settings(max_examples=200)
@given(st.integers(2, 10), st.integers(2, 10), st.sets(st.sampled_from("abcdef")), st.sets(st.sampled_from("abcdef")))
def test_similarity_bounds_symmetry(a1, a2, s1, s2):
    c1, c2 = ChildProfile("p", a1, 1, "f"), ChildProfile("q", a2, 1, "m")
    sets = {"p": s1, "q": s2}
    x, y = child_similarity(c1, c2, sets), child_similarity(c2, c1, sets)
    assert 0.0 <= x.sim <= 1.0 and x.sim == y.sim


def test_intensive_requires_both_thresholds():
    games = plays("c", "a", 10, dur=6.0) + plays("c", "b", 9, dur=100.0) + plays("c", "d", 12, dur=5.0)
    got = intensive_apps(rec_view(games), "c")
    assert got == IntensiveAppSet("c", frozenset({"a", "d"}))


# -- neighbourhood -------------------------------------------------------------------

def test_neighborhood_disjoint_population_is_empty():
    t, o = ChildProfile("t", 5, 1), ChildProfile("o", 5, 1)
    nb = build_neighborhood(t, [t, o], rec_view(plays("t", "a", 3) + plays("o", "b", 3)))
    assert len(nb) == 0


def test_neighborhood_cap():
    target = ChildProfile("t", 5, 1)
    others = [ChildProfile(f"o{i:03d}", 5, 1) for i in range(150)]
    games = plays("t", "a", 12) + plays("t", "b", 12)
    for o in others:
        games += plays(o.child_id, "a", 12) + plays(o.child_id, "b", 1)
    # same age (0.4) + jaccard 1/2 (0.3) = 0.7 for every candidate
    nb = build_neighborhood(target, others, rec_view(games))
    assert len(nb) == 100
    assert nb.ids == sorted(o.child_id for o in others)[:100]


def test_neighborhood_threshold_inclusive():
    target = ChildProfile("t", 5, 1)
    at = ChildProfile("at", 6, 1)      # 0.2 + 0.6 * 1/2 = 0.5
    below = ChildProfile("below", 6, 1)  # 0.2 + 0.6 * 0.48 = 0.488
    games = plays("t", "a", 12) + plays("t", "b", 12)
    games += plays("at", "a", 12)
    games += plays("below", "a", 12)
    for j in range(2, 27):  # widen the union so jaccard drops below 1/2
        games += plays("below", f"z{j}", 12)
    games += plays("below", "b", 12)
    nb = build_neighborhood(target, [at, below], rec_view(games))
    sims = dict(nb.members)
    assert sims["at"] == pytest.approx(0.5)
    assert "below" not in sims


def test_neighborhood_jaccard_sixth_boundary():
    # same age: 0.4 + 0.6 * 1/6 equals 0.5 exactly in rationals
    target = ChildProfile("t", 5, 1)
    other = ChildProfile("o", 5, 1)
    games = plays("t", "a", 12) + [g for j in range(3) for g in plays("t", f"t{j}", 12)]
    games += plays("o", "a", 12) + [g for j in range(2) for g in plays("o", f"o{j}", 12)]
    nb = build_neighborhood(target, [other], rec_view(games))
    assert nb.ids == ["o"]


@pytest.mark.parametrize("seed", range(60))
def test_neighborhood_and_cf_match_oracle(seed):
    cat, kids, games = random_world(seed)
    view = rec_view(games)
    for target in kids:
        nb = build_neighborhood(target, kids, view)
        want = oracles.neighborhood(target, kids, games)
        assert nb.ids == [c for c, _ in want]
        for (_, s), (_, w) in zip(nb.members, want):
            assert abs(s - float(w)) <= 1e-12
        got = cf_ranking(target, nb, view)
        want_cf = oracles.cf_interest(target, want, games)
        assert [s.app_id for s in got] == [a for a, _ in want_cf]
        for s, (_, w) in zip(got, want_cf):
            assert s.interest == pytest.approx(float(w), rel=1e-12)


# -- CF scoring ----------------------------------------------------------------------

def test_cf_single_neighbor():
    games = plays("n1", "a", 5)
    got = cf_ranking("t", Neighborhood("t", (("n1", 0.8),)), rec_view(games))
    assert [(s.app_id, s.interest) for s in got] == [("a", pytest.approx(4.0))]


def test_cf_excludes_played():
    games = plays("n1", "a", 5) + plays("t", "a", 1)
    assert cf_ranking("t", Neighborhood("t", (("n1", 0.8),)), rec_view(games)) == []


def test_cf_denominator_is_neighborhood_size():
    games = plays("n1", "a", 2) + plays("n2", "b", 1)
    got = cf_ranking("t", Neighborhood("t", (("n1", 0.6), ("n2", 0.5))), rec_view(games))
    assert dict((s.app_id, s.interest) for s in got)["a"] == pytest.approx(0.6)


def test_cf_empty_neighborhood():
    assert cf_ranking("t", Neighborhood("t"), rec_view(plays("x", "a", 4))) == []


# -- random ----------------------------------------------------------------------------

def test_random_ranking_basics():
    assert random_ranking({"a"}, 1) == ["a"]
    assert random_ranking(set("abcdefg"), 9) == random_ranking(set("gfedcba"), 9)
    assert sorted(random_ranking(set("abcdefg"), 3)) == list("abcdefg")


def test_random_first_element_uniform():
    firsts = [random_ranking(set("abcde"), s)[0] for s in range(10_000)]
    freq = np.array([firsts.count(a) for a in "abcde"]) / 10_000
    assert np.all(np.abs(freq - 0.2) <= 0.02)


# -- ribbons ---------------------------------------------------------------------------

def _ctx(cat, kids, games, **cfg):
    ids = sorted({k.child_id for k in kids} | {g.child_id for g in games})
    usage = UsageMatrix.from_view(rec_view(games), ids, cat.app_ids())
    return RecommenderContext(cat, kids, usage, RecommenderConfig(**cfg))


def _big_catalog(n=12):
    cat = Catalog()
    for j in range(n):
        cat.register(app(f"a{j:02d}", AS_OF - timedelta(days=10)))
    return cat.freeze()


def test_ribbon_strategy_then_random():
    cat = _big_catalog()
    kid = ChildProfile("k", 5, 1)
    games = plays("x", "a05", 30) + plays("x", "a03", 20) + plays("x", "a07", 10) + plays("x", "a01", 5)
    rib = assemble_ribbon(kid, Strategy.POPULAR, _ctx(cat, [kid], games), 1, GEN_AT)
    assert rib.app_ids[:3] == ["a05", "a03", "a07"]
    assert [s.source for s in rib.slots] == [Strategy.POPULAR] * 3 + [Strategy.RANDOM] * 4
    assert len(set(rib.app_ids)) == 7


def test_ribbon_cf_without_neighbors_is_random():
    cat = _big_catalog()
    kid = ChildProfile("k", 5, 1)
    rib = assemble_ribbon(kid, Strategy.CF, _ctx(cat, [kid], []), 1, GEN_AT)
    assert len(rib.slots) == 7 and all(s.source is Strategy.RANDOM for s in rib.slots)


def test_ribbon_exhaustion():
    cat = Catalog().register(app("a", AS_OF)).register(app("b", AS_OF)).freeze()
    kid = ChildProfile("k", 5, 1)
    assert len(assemble_ribbon(kid, Strategy.RANDOM, _ctx(cat, [kid], []), 1, GEN_AT).slots) == 2


def test_ribbon_empty_when_nothing_eligible():
    cat = Catalog().register(app("a", AS_OF, blacklisted=True)).freeze()
    kid = ChildProfile("k", 5, 1)
    assert assemble_ribbon(kid, Strategy.POPULAR, _ctx(cat, [kid], []), 1, GEN_AT).slots == ()


def test_ribbon_popular_shortfall_filled_randomly():
    cat = _big_catalog()
    kid = ChildProfile("k", 5, 1)
    rib = assemble_ribbon(kid, Strategy.POPULAR, _ctx(cat, [kid], plays("x", "a02", 4)), 5, GEN_AT)
    assert rib.slots[0].app_id == "a02" and rib.slots[0].source is Strategy.POPULAR
    assert all(s.source is Strategy.RANDOM for s in rib.slots[1:])


def test_ribbon_deterministic_per_seed():
    cat = _big_catalog()
    kid = ChildProfile("k", 5, 1)
    ctx = _ctx(cat, [kid], [])
    assert assemble_ribbon(kid, Strategy.RANDOM, ctx, 3, GEN_AT) == assemble_ribbon(kid, Strategy.RANDOM, ctx, 3, GEN_AT)


def test_config_validation():
    with pytest.raises(ValidationError):
        RecommenderConfig(k=8)
    with pytest.raises(ValidationError):
        RecommenderConfig(age_weight=0.5, jaccard_weight=0.6)
