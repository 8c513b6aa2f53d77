import io
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, MINI
from hdbi.core import REPORTING_GROUPS, FoodGroup
from hdbi.errors import DuplicateMapping, MissingColumn, UnknownGroup, Unmapped
from hdbi.ingest import Methodology, SupplyObservation, load_area_names, parse_fbs_csv, to_observations
from hdbi.mapping import classify, group_supply, load_commodity_map, unmapped_codes

G = FoodGroup
DEFAULT = load_commodity_map()


def o(item, kcal, cid="X", year=2000):
    return SupplyObservation(cid, item, year, float(kcal), Methodology.OLD)


def test_default_map_named_items():
    assert classify(2511, DEFAULT) is G.STARCHY_STAPLES  # wheat
    assert classify(2577, DEFAULT) is G.OILS_FATS  # palm oil
    assert classify(2655, DEFAULT) is G.EXCLUDED  # wine
    assert classify(2556, DEFAULT) is G.LEGUMES_NUTS_SEEDS  # groundnuts
    assert classify(2615, DEFAULT) is G.FRUITS  # bananas
    assert classify(2848, DEFAULT) is G.ANIMAL_SOURCE_FOODS  # milk
    with pytest.raises(Unmapped):
        classify(9999, DEFAULT)


def test_default_map_every_entry_has_a_note():
    assert all(DEFAULT.provenance[c] for c in DEFAULT.entries)


def test_duplicate_and_unknown_rows():
    with pytest.raises(DuplicateMapping):
        load_commodity_map(io.StringIO("item_code,group\n2511,Fruits\n2511,Vegetables\n"))
    with pytest.raises(UnknownGroup):
        load_commodity_map(io.StringIO("item_code,group\n2511,Candy\n"))
    with pytest.raises(MissingColumn):
        load_commodity_map(io.StringIO("code,group\n2511,Fruits\n"))


def test_semicolon_delimited_map():
    m = load_commodity_map(io.StringIO("item_code;group;note\n2511;StarchyStaples;wheat\n"))
    assert classify(2511, m) is G.STARCHY_STAPLES and m.provenance[2511] == "wheat"


def test_default_map_covers_fixture_panels():
    names = load_area_names()
    codes = set()
    for path, variant in [
        (MINI / "fbsh_long.csv", "FBSH"),
        (MINI / "fbs_wide.csv", "FBS"),
        (FIXTURES / "faostat" / "fbs_kenya_50.csv", "FBS"),
        (FIXTURES / "faostat" / "fbsh_mixed_40.csv", "FBSH"),
    ]:
        codes |= {x.item_code for x in to_observations(parse_fbs_csv(path, variant), variant, area_names=names)}
    assert codes and unmapped_codes(codes, DEFAULT) == []


def test_singleton_and_additivity():
    (s,) = group_supply([o(2511, 500)], DEFAULT)
    assert s.kcal[G.STARCHY_STAPLES] == 500
    assert all(s.kcal[g] == 0 for g in REPORTING_GROUPS if g is not G.STARCHY_STAPLES)
    (s,) = group_supply([o(2511, 500), o(2805, 600)], DEFAULT)
    assert s.kcal[G.STARCHY_STAPLES] == 1100


def test_excluded_contributes_nothing():
    (s,) = group_supply([o(2511, 500), o(2656, 120)], DEFAULT)
    assert s.total_kcal == 500


def test_unmapped_propagates():
    with pytest.raises(Unmapped) as e:
        group_supply([o(2511, 1), o(1, 1)], DEFAULT)
    assert e.value.item_code == 1


def test_fixture_panel_matches_hand_sums():
    man = json.loads((FIXTURES / "faostat" / "fbs_kenya_50.manifest.json").read_text())
    recs = parse_fbs_csv(FIXTURES / "faostat" / "fbs_kenya_50.csv", "FBS")
    obs = to_observations(recs, "FBS", area_names=load_area_names())
    sups = group_supply(obs, DEFAULT)
    assert [s.year for s in sups] == man["years"]
    for label, totals in man["group_totals_by_year"].items():
        assert [s.kcal[G(label)] for s in sups] == totals


obs_lists = st.lists(
    st.builds(
        o,
        st.sampled_from(sorted(DEFAULT.entries)),
        st.integers(0, 4000).map(lambda k: k / 4),
        st.sampled_from(["A", "B"]),
        st.sampled_from([2000, 2001]),
    ),
    max_size=60,
    unique_by=lambda x: x.key,
)


@settings(max_examples=200)
@given(obs_lists, st.randoms(use_true_random=False))
def test_conservation_and_permutation(xs, rnd):
    sups = group_supply(xs, DEFAULT)
    # quarter-kcal values keep every partial sum exact
    expected = sum(x.kcal_per_capita_day for x in xs if DEFAULT.entries[x.item_code] is not G.EXCLUDED)
    assert sum(s.total_kcal for s in sups) == expected
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    assert group_supply(shuffled, DEFAULT) == sups


@settings(max_examples=100)
@given(obs_lists, st.sampled_from(sorted(DEFAULT.entries)), st.floats(0.001, 500))
def test_adding_positive_observation_is_monotone(xs, item, kcal):
    new = o(item, kcal, "A", 2000)
    xs = [x for x in xs if x.key != new.key]
    before = {(s.country_id, s.year): s for s in group_supply(xs, DEFAULT)}
    after = group_supply(xs + [new], DEFAULT)
    for s in after:
        b = before.get((s.country_id, s.year))
        if b is not None:
            assert all(s.kcal[g] >= b.kcal[g] for g in REPORTING_GROUPS)


def test_permutation_invariance_with_arbitrary_floats():
    rng = np.random.default_rng(11)
    codes = sorted(DEFAULT.entries)
    xs = [o(int(rng.choice(codes)), rng.uniform(0, 900), f"c{i % 7}", 2000 + i % 3) for i in range(400)]
    xs = list({x.key: x for x in xs}.values())
    ref = group_supply(xs, DEFAULT)
    for seed in range(5):
        ys = list(xs)
        random.Random(seed).shuffle(ys)
        assert group_supply(ys, DEFAULT) == ref
