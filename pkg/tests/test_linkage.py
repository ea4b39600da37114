import pytest

from crossborder.linkage import (DistanceFeatures, candidate_set, feature_vector, index_register, link_batch, link_one,
                                 read_features, write_features)
from crossborder.normalize import StemmedName, build_suffix_table, load_known_entities
from crossborder.strdist import METRICS, distance

KNOWN = load_known_entities()
REGISTER = [(0, "Acme Trading Ltd", "GB"), (1, "Acme Trading GmbH", "DE"), (2, "Bolt Shoes Limited", "GB"),
            (3, "Corvid Books BV", "NL"), (4, "Zeta Garden Ltd", "GB")]


@pytest.fixture(scope="module")
def setup():
    table = build_suffix_table([(n, c) for _, n, c in REGISTER], KNOWN)
    return table, index_register(REGISTER, table, seed=0)


def test_exact_name_gives_zero_distances(setup):
    table, index = setup
    feat = link_one("ACME Trading Ltd.", table, index)
    assert not feat.missing
    assert feat.values == (0.0,) * len(METRICS)
    assert feat.best_match[0] in (0, 1)


def test_suffix_class_filters_candidates(setup):
    _, index = setup
    got = candidate_set(StemmedName("acme trading", "ltd", "ltd"), index)
    assert ("acme trading", 0) in got
    got = candidate_set(StemmedName("acme trading", "gmbh", "gmbh"), index)
    assert ("acme trading", 1) in got
    # abbreviation relation: ltd ~ limited
    got = candidate_set(StemmedName("bolt shoes", "ltd", "ltd"), index)
    assert ("bolt shoes", 2) in got
    got = candidate_set(StemmedName("corvid books", "gmbh", "gmbh"), index)
    assert all(stem != "corvid books" for stem, _ in got)


def test_missing_suffix_is_compatible_with_anything(setup):
    _, index = setup
    assert ("corvid books", 3) in candidate_set(StemmedName("corvid books"), index)


def test_short_or_unusable_names_are_missing(setup):
    table, index = setup
    assert link_one("AB Ltd", table, index).missing
    assert link_one("!!!", table, index).missing
    assert link_one("Acme", table, None).missing


def test_feature_vector_is_minimum_over_candidates():
    feat = feature_vector(StemmedName("acne trading"), ["acme trading", "zeta garden"])
    for m, v in zip(METRICS, feat.values):
        assert v == pytest.approx(min(distance(m, "acne trading", c) for c in ["acme trading", "zeta garden"]))
    assert feature_vector(StemmedName("acne"), []).missing


def test_min_stem_length_is_configurable():
    assert feature_vector(StemmedName("ab"), ["ab"], min_stem_length=2).values[0] == 0.0
    assert feature_vector(StemmedName("ab"), ["ab"]).missing


def test_batch_is_sorted_and_roundtrips(setup, tmp_path):
    table, index = setup
    feats = link_batch([("b", "Zeta Garden Ltd"), ("a", "Acme Trading Ltd"), ("c", "!!")], table, index)
    assert list(feats) == ["a", "b", "c"]
    path = tmp_path / "d.csv"
    write_features(path, feats, "config=x seed=0 stage=link")
    assert path.read_text().startswith("# config=x seed=0 stage=link\n")
    back = read_features(path)
    assert back["c"] == DistanceFeatures.absent()
    assert back["a"].values == feats["a"].values
