"""Sibling/cousin feature assembly and standardization."""

import io

import pytest

from ppistats import (
    DataError,
    DomainError,
    FeatureVector,
    Standardizer,
    assemble_features,
    feature_matrix,
    fit_standardizer,
    parse_newick,
)
from ppistats.features import (
    COUSIN_FALLBACK,
    FEATURE_NAMES,
    FEATURES_CSV_HEADER,
    SIBLING_FALLBACK,
    global_stat_means,
    write_features_csv,
)
from ppistats.stats import STAT_FIELDS, StatVector

TREE = parse_newick("((A:1,B:2)ab:1,(C:3,(D:1,E:1)de:2)cde:1)r;")


def sv(base, assort=0.5):
    """StatVector with every component equal to `base` except where the
    type forces an int, plus a controllable assortativity."""
    kw = {}
    for name in STAT_FIELDS:
        kw[name] = base
    kw["assortative_mixing"] = assort
    return StatVector(**kw)


STATS = {
    "A": sv(10.0),
    "B": sv(20.0),
    "C": sv(40.0, assort=None),
    "D": sv(80.0),
    "E": sv(160.0),
}


def test_feature_names_order():
    assert FEATURE_NAMES[0] == "sib_nodes"
    assert FEATURE_NAMES[19] == "cuz_nodes"
    assert len(FEATURE_NAMES) == 38


def test_sibling_and_cousin_means():
    train = {"A", "B", "C", "D", "E"}
    fv = assemble_features(TREE, STATS, "A", train)
    assert fv.n_siblings == 1 and fv.n_cousins == 2
    # sibling of A is B; cousins at depth 2 are B and C
    assert fv.sibling_means[0] == pytest.approx(20.0)
    assert fv.cousin_means[0] == pytest.approx(30.0)
    assert fv.flags == frozenset()


def test_none_components_are_excluded_from_means():
    train = {"A", "B", "C", "D", "E"}
    fv = assemble_features(TREE, STATS, "D", train)
    # siblings(D) = {E}; cousins(D, depth 3) = {E}
    assert fv.sibling_means[0] == pytest.approx(160.0)
    pos = STAT_FIELDS.index("assortative_mixing")
    # C's None assortativity must not poison sets that include C
    fv_a = assemble_features(TREE, STATS, "A", train)
    assert fv_a.cousin_means[pos] == pytest.approx(0.5)


def test_all_none_component_falls_back_without_flag():
    stats = dict(STATS)
    stats["B"] = sv(20.0, assort=None)
    train = {"A", "B", "C", "D", "E"}
    fv = assemble_features(TREE, stats, "A", train)
    pos = STAT_FIELDS.index("assortative_mixing")
    # sibling set {B} has only None assortativity -> global train mean,
    # which averages the three defined values 0.5
    assert fv.sibling_means[pos] == pytest.approx(0.5)
    assert fv.flags == frozenset()
    assert fv.sibling_means[0] == pytest.approx(20.0)


def test_empty_relative_sets_use_global_means_and_flag():
    tiny = parse_newick("(A:1,B:1)r;")
    stats = {"A": sv(10.0), "B": sv(20.0)}
    fv = assemble_features(tiny, stats, "A", {"A"})
    assert fv.flags == {SIBLING_FALLBACK, COUSIN_FALLBACK}
    assert fv.n_siblings == 0 and fv.n_cousins == 0
    # global means over train {A} only
    assert fv.sibling_means[0] == pytest.approx(10.0)
    assert fv.cousin_means[0] == pytest.approx(10.0)


def test_features_never_use_the_species_own_stats():
    train = {"A", "B", "C", "D", "E"}
    poisoned = dict(STATS)
    poisoned["A"] = sv(1e9)
    fv = assemble_features(TREE, STATS, "A", train - {"A"})
    fv_poisoned = assemble_features(TREE, poisoned, "A", train - {"A"})
    assert fv.sibling_means == fv_poisoned.sibling_means
    assert fv.cousin_means == fv_poisoned.cousin_means


def test_missing_train_stats_raise():
    with pytest.raises(DataError):
        global_stat_means({"A": sv(1.0)}, ["A", "B"])
    with pytest.raises(DomainError):
        global_stat_means(STATS, [])


def test_feature_matrix_matches_single_assembly():
    train = {"A", "B", "C"}
    rows = feature_matrix(TREE, STATS, ["D", "E"], train)
    assert [fv.species_id for fv in rows] == ["D", "E"]
    solo = assemble_features(TREE, STATS, "D", train)
    assert rows[0] == solo


def test_feature_vector_length_validation():
    with pytest.raises(DomainError):
        FeatureVector("x", (1.0,), (1.0,) * 19, 0, 0)


def test_standardizer_zscores_and_constant_features():
    s = fit_standardizer([[1.0, 5.0], [3.0, 5.0]])
    assert s.mean == (2.0, 5.0)
    assert s.std[0] == pytest.approx(1.0)
    assert s.std[1] == 0.0
    assert s.apply([3.0, 99.0]) == [pytest.approx(1.0), 0.0]
    mat = s.apply_matrix([[1.0, 5.0], [3.0, 5.0]])
    assert mat.shape == (2, 2)
    assert mat[0, 0] == pytest.approx(-1.0)


def test_standardizer_input_validation():
    with pytest.raises(DomainError):
        fit_standardizer([[1.0, 2.0]])
    with pytest.raises(DomainError):
        fit_standardizer([[1.0], [float("nan")]])
    s = Standardizer(mean=(0.0,), std=(1.0,))
    with pytest.raises(DomainError):
        s.apply([1.0, 2.0])


def test_write_features_csv_layout():
    tiny = parse_newick("(A:1,B:1)r;")
    stats = {"A": sv(10.0), "B": sv(0.125)}
    rows = feature_matrix(tiny, stats, ["A", "B"], {"A", "B"})
    buf = io.StringIO()
    write_features_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == FEATURES_CSV_HEADER
    cells = lines[0].split(",")
    assert cells[-1] == "flags" and len(cells) == 1 + 38 + 3
    a_cells = lines[1].split(",")
    assert a_cells[0] == "A"
    assert a_cells[1] == "0.125"
    assert a_cells[-3:] == ["1", "1", ""]
    b_cells = lines[2].split(",")
    assert b_cells[1] == "10"
