import json
from collections import Counter
from datetime import date

import numpy as np
import pytest
from scipy.stats import chisquare

from ribbonrec.catalog import (AppRecord, Catalog, ChildProfile, ExperimentGroup, ValidationError,
                               assign_group, eligible_apps, is_eligible, load_catalog, load_children,
                               register_app)
from scenarios import random_catalog, random_children


def app(app_id="x", lo=4, hi=6, version=1, blacklisted=False):
    return AppRecord(app_id, "T", "logic", lo, hi, date(2018, 1, 1), version, blacklisted)


def test_register_base_case():
    cat = register_app(app(), Catalog())
    assert len(cat) == 1 and cat["x"].min_age == 4


def test_register_duplicate_names_id():
    cat = register_app(app(), Catalog())
    with pytest.raises(ValidationError, match="'x'"):
        register_app(app(), cat)


def test_invalid_age_range():
    with pytest.raises(ValidationError):
        app(lo=7, hi=4)


def test_frozen_catalog_rejects_writes():
    cat = Catalog().freeze()
    with pytest.raises(ValidationError):
        cat.register(app())


def test_age_filter_example():
    cat = register_app(app(lo=4, hi=6), Catalog())
    assert eligible_apps(ChildProfile("c", 3, 4), cat) == frozenset()


def test_version_filter_example():
    cat = register_app(app(version=4, lo=2, hi=10), Catalog())
    assert eligible_apps(ChildProfile("c", 5, 3), cat) == frozenset()


def test_all_blacklisted_is_empty():
    cat = Catalog()
    for i in range(4):
        cat.register(app(f"a{i}", 2, 10, 1, True))
    assert eligible_apps(ChildProfile("c", 5, 9), cat) == frozenset()


@pytest.mark.parametrize("seed", range(30))
def test_filter_sound_and_complete(seed):
    rng = np.random.default_rng(seed)
    cat = random_catalog(rng, 15)
    for child in random_children(rng, 5, ages=range(2, 11)):
        got = eligible_apps(child, cat)
        want = {a.app_id for a in cat
                if not a.blacklisted and a.min_app_version <= child.app_version
                and a.min_age <= child.age <= a.max_age}
        assert got == want


def test_gender_does_not_affect_eligibility():
    cat = random_catalog(np.random.default_rng(0), 20)
    assert eligible_apps(ChildProfile("c", 5, 3, "f"), cat) == eligible_apps(ChildProfile("c", 5, 3, "m"), cat)


def test_assign_group_deterministic_and_seed_sensitive():
    assert assign_group("kid-1", 7) == assign_group("kid-1", 7)
    ids = [f"kid-{i}" for i in range(200)]
    assert any(assign_group(i, 1) != assign_group(i, 2) for i in ids)


def test_assign_group_uniform_chi_square():
    counts = Counter(assign_group(f"u{i}", 11) for i in range(10_000))
    assert chisquare([counts[g] for g in ExperimentGroup]).pvalue > 0.01


def test_group_is_immutable_once_set():
    c = ChildProfile("c", 5, 1).with_group(ExperimentGroup.A)
    assert c.with_group(ExperimentGroup.A).group is ExperimentGroup.A
    with pytest.raises(ValidationError):
        c.with_group(ExperimentGroup.B)


def test_load_catalog_jsonl_ignores_unknown_fields():
    rec = app("z").to_json() | {"extra": 1}
    cat = load_catalog([json.dumps(rec)])
    assert cat["z"].published_date == date(2018, 1, 1)


def test_load_catalog_missing_field_reports_line():
    rec = app("z").to_json()
    del rec["min_age"]
    with pytest.raises(ValidationError, match="line 2.*min_age"):
        load_catalog([json.dumps(app("y").to_json()), json.dumps(rec)])


def test_load_children_roundtrip():
    kids = [ChildProfile("a", 3, 2, "f", ExperimentGroup.C), ChildProfile("b", 9, 1)]
    back = load_children([json.dumps(k.to_json()) for k in kids])
    assert back == kids
