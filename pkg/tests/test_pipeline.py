"""End-to-end prediction and classification workflows."""

import io

import numpy as np
import pytest

from ppistats import (
    ConfigurationError,
    DataError,
    DomainError,
    evaluate_lineage,
    parse_newick,
    permutation_test,
    predict_lineage,
    split_train_test,
    train_hierarchy,
)
from ppistats.pipeline import (
    FIGURE_DATA_HEADER,
    LEVELS_CSV_HEADER,
    NODES_CSV_HEADER,
    PREDICTOR_REPORT_HEADER,
    dump_json,
    evaluate_predictor,
    figure_data_rows,
    hierarchy_from_dict,
    hierarchy_to_dict,
    impute_stat_row,
    load_json,
    predictor_from_dict,
    predictor_predictions,
    predictor_to_dict,
    train_predictor,
    write_figure_data_csv,
    write_levels_csv,
    write_nodes_csv,
    write_predictions_csv,
    write_predictor_report,
)
from ppistats.stats import STAT_FIELDS, StatVector
from ppistats.taxonomy import build_from_canonical

INT_NAMES = ("nodes", "edges", "maximum_degree", "num_components",
             "full_diameter", "kcore_max_k", "kcore_nodes", "kcore_edges")


def sv(base, assort=0.5, bumps=None):
    kw = {name: float(base) for name in STAT_FIELDS}
    if bumps:
        for name, delta in bumps.items():
            kw[name] = kw[name] + delta
    for name in INT_NAMES:
        kw[name] = int(round(kw[name]))
    kw["assortative_mixing"] = assort
    return StatVector(**kw)


# --- train/test splitting ----------------------------------------------

def test_split_is_seeded_and_disjoint():
    species = [f"s{i}" for i in range(10)]
    train, test = split_train_test(species, 0.8, seed=1)
    assert len(train) == 8 and len(test) == 2
    assert sorted(train + test) == species
    assert (train, test) == split_train_test(species, 0.8, seed=1)
    assert split_train_test(species, 0.8, seed=2) != (train, test)
    assert train == sorted(train) and test == sorted(test)


def test_split_clamps_and_validates():
    species = [f"s{i}" for i in range(6)]
    train, test = split_train_test(species, 0.999)
    assert len(test) == 1
    train, test = split_train_test(species, 0.001)
    assert len(train) == 1
    with pytest.raises(DomainError):
        split_train_test(["a", "b", "c", "d"], 0.8)
    with pytest.raises(DomainError):
        split_train_test(species, 1.0)


def test_impute_stat_row_fills_undefined_components():
    vec = sv(10.0, assort=None)
    means = [float(i) for i in range(19)]
    row = impute_stat_row(vec, means)
    pos = STAT_FIELDS.index("assortative_mixing")
    assert row[pos] == float(pos)
    assert row[0] == 10.0


# --- statistic predictor --------------------------------------------------


def balanced_tree(names):
    def nest(lst):
        if len(lst) == 1:
            return lst[0] + ":1"
        mid = len(lst) // 2
        return f"({nest(lst[:mid])},{nest(lst[mid:])}):1"
    return parse_newick(nest(names)[:-2] + ";")


def clustered_data(n=30, seed=0):
    """Stats that vary smoothly along the leaf order, so sibling/cousin
    means are informative."""
    rng = np.random.default_rng(seed)
    names = [f"s{i:02d}" for i in range(n)]
    tree = balanced_tree(names)
    stats = {}
    for i, s in enumerate(names):
        noise = rng.normal() * 0.3
        stats[s] = sv(500.0 + 10.0 * i + noise)
    return tree, stats, names


def test_predictor_learns_smooth_signal():
    tree, stats, names = clustered_data()
    train, test = split_train_test(names, 0.8, seed=0)
    model = train_predictor(tree, stats, train, C=100.0, max_iters=2000)
    report, predictions = evaluate_predictor(model, tree, stats, test)
    by_stat = {row.statistic: row for row in report.rows}
    assert set(by_stat) == set(STAT_FIELDS)
    for row in report.rows:
        assert row.n == len(test) and row.excluded == 0
        assert row.mean < 0.2
    assert set(predictions["nodes"]) == set(test)


def test_predictor_excludes_zero_and_undefined_actuals():
    tree, stats, names = clustered_data(n=12)
    train, test = split_train_test(names, 0.8, seed=0)
    victim = test[0]
    kw = {name: getattr(stats[victim], name) for name in STAT_FIELDS}
    kw["gini_degree"] = 0.0
    kw["assortative_mixing"] = None
    stats[victim] = StatVector(**kw)
    model = train_predictor(tree, stats, train, max_iters=500)
    report, _ = evaluate_predictor(model, tree, stats, test)
    by_stat = {row.statistic: row for row in report.rows}
    assert by_stat["gini_degree"].excluded == 1
    assert by_stat["gini_degree"].n == len(test) - 1
    assert by_stat["assortative_mixing"].excluded == 1
    assert by_stat["nodes"].excluded == 0


def test_predictor_requires_two_defined_targets():
    tree, stats, names = clustered_data(n=8)
    for s in names[:7]:
        kw = {name: getattr(stats[s], name) for name in STAT_FIELDS}
        kw["assortative_mixing"] = None
        stats[s] = StatVector(**kw)
    with pytest.raises(DataError):
        train_predictor(tree, stats, names, max_iters=100)


def test_predictions_ignore_test_statistics_entirely():
    tree, stats, names = clustered_data(n=16)
    train, test = split_train_test(names, 0.8, seed=3)
    model = train_predictor(tree, stats, train, max_iters=500)
    baseline = predictor_predictions(model, tree, stats, test)
    poisoned = dict(stats)
    for s in test:
        poisoned[s] = sv(0.0, assort=None)
    del poisoned[test[0]]
    again = predictor_predictions(model, tree, poisoned, test)
    assert baseline == again


def test_predictor_json_round_trip(tmp_path):
    tree, stats, names = clustered_data(n=12)
    train, test = split_train_test(names, 0.8, seed=0)
    model = train_predictor(tree, stats, train, max_iters=500,
                            test_species=test)
    text = dump_json(predictor_to_dict(model))
    assert dump_json(predictor_to_dict(model)) == text
    back = predictor_from_dict(load_json(io.StringIO(text)))
    assert back.train_species == model.train_species
    assert back.test_species == tuple(test)
    assert (predictor_predictions(back, tree, stats, test)
            == predictor_predictions(model, tree, stats, test))
    with pytest.raises(DataError):
        predictor_from_dict({"format": "hierarchy"})
    with pytest.raises(DataError):
        load_json(io.StringIO("{nope"))


def test_predictor_report_csv_layout():
    tree, stats, names = clustered_data(n=12)
    train, test = split_train_test(names, 0.8, seed=0)
    model = train_predictor(tree, stats, train, max_iters=500)
    report, predictions = evaluate_predictor(model, tree, stats, test)
    buf = io.StringIO()
    write_predictor_report(report, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == PREDICTOR_REPORT_HEADER
    assert len(lines) == 1 + 19
    assert lines[1].split(",")[0] == "nodes"
    buf2 = io.StringIO()
    write_predictions_csv(predictions, buf2)
    rows = buf2.getvalue().splitlines()
    assert rows[0] == "species_id," + ",".join(STAT_FIELDS)
    assert len(rows) == 1 + len(test)


# --- hierarchical classifier ----------------------------------------------


def taxonomy_fixture(per_leaf=4, spread=0.25, seed=0):
    """Two domains x two kingdoms with separable statistics.

    Below kingdom every rank has a single child, so those levels are
    pass-through. Returns (taxonomy, stats).
    """
    rng = np.random.default_rng(seed)
    paths = {}
    stats = {}
    signals = {
        ("D0", "K00"): {"average_degree": 30.0},
        ("D0", "K01"): {"average_degree": 30.0, "density": 30.0},
        ("D1", "K10"): {"global_clustering": 30.0},
        ("D1", "K11"): {"global_clustering": 30.0, "gini_degree": 30.0},
    }
    idx = 0
    for (dom, kin), bumps in sorted(signals.items()):
        for j in range(per_leaf):
            sid = f"x{idx:03d}"
            idx += 1
            paths[sid] = [dom, kin, kin + "p", kin + "c", kin + "o",
                          kin + "f"]
            jitter = {k: v + rng.normal() * spread for k, v in bumps.items()}
            stats[sid] = sv(10.0, bumps=jitter)
    taxonomy = build_from_canonical(sorted(paths.items()))
    return taxonomy, stats


def test_hierarchy_trains_classifiers_and_pass_throughs():
    taxonomy, stats = taxonomy_fixture()
    model = train_hierarchy(taxonomy, stats, stats.keys(), max_iters=1500)
    root = taxonomy.root
    assert root in model.classifiers
    assert model.classifiers[root].labels == ("D0", "D1")
    # domain nodes classify kingdoms; deeper levels pass through
    assert len(model.classifiers) == 3
    assert len(model.pass_through) == 4 * 4  # phylum..family chains
    assert model.untrainable == {}
    counts = model.training_counts[root]
    assert counts == {"D0": 8, "D1": 8}


def test_hierarchy_predicts_training_species():
    taxonomy, stats = taxonomy_fixture()
    model = train_hierarchy(taxonomy, stats, stats.keys(), max_iters=1500)
    hits = 0
    for s in taxonomy.species():
        predicted = predict_lineage(model, stats[s])
        assert not predicted.truncated
        hits += predicted.names() == taxonomy.lineage_of(s).names()
    assert hits >= 15


def test_hierarchy_singleton_children_are_excluded():
    taxonomy, stats = taxonomy_fixture()
    # one extra species alone under a third kingdom of D0
    paths = {s: list(taxonomy.lineage_of(s).names())
             for s in taxonomy.species()}
    paths["lone"] = ["D0", "K09", "K09p", "K09c", "K09o", "K09f"]
    stats["lone"] = sv(10.0, bumps={"average_degree": 31.0})
    bigger = build_from_canonical(sorted(paths.items()))
    model = train_hierarchy(bigger, stats, stats.keys(), max_iters=1500)
    d0 = bigger.child(bigger.root, "domain", "D0")
    assert d0 in model.classifiers
    assert model.classifiers[d0].labels == ("K00", "K01")
    k09 = bigger.child(d0, "kingdom", "K09")
    assert k09 in model.untrainable
    assert "fewer than 2" in model.untrainable[k09]
    assert model.training_counts[d0]["K09"] == 1


def test_hierarchy_truncates_at_untrainable_node():
    # D1 has two kingdoms with one species each: D1's node cannot train
    paths = {
        "a1": ["D0", "K0", "P0", "C0", "O0", "F0"],
        "a2": ["D0", "K0", "P0", "C0", "O0", "F0"],
        "a3": ["D0", "K0", "P0", "C0", "O0", "F0"],
        "b1": ["D1", "KA", "PA", "CA", "OA", "FA"],
        "b2": ["D1", "KB", "PB", "CB", "OB", "FB"],
    }
    stats = {s: sv(10.0, bumps={"density": 20.0 if s.startswith("b") else 0.0})
             for s in paths}
    taxonomy = build_from_canonical(sorted(paths.items()))
    model = train_hierarchy(taxonomy, stats, paths.keys(), max_iters=1000)
    d1 = taxonomy.child(taxonomy.root, "domain", "D1")
    assert d1 in model.untrainable
    predicted = predict_lineage(model, stats["b1"])
    assert predicted.truncated
    assert predicted.names() == ("D1",)


def test_hierarchy_single_eligible_child_passes_through():
    paths = {
        "a1": ["D0", "K0", "P0", "C0", "O0", "F0"],
        "a2": ["D0", "K0", "P0", "C0", "O0", "F0"],
        "a3": ["D0", "K9", "P9", "C9", "O9", "F9"],
        "b1": ["D1", "KA", "PA", "CA", "OA", "FA"],
        "b2": ["D1", "KA", "PA", "CA", "OA", "FA"],
    }
    stats = {s: sv(10.0, bumps={"density": 20.0 if s.startswith("b") else 0.0})
             for s in paths}
    taxonomy = build_from_canonical(sorted(paths.items()))
    model = train_hierarchy(taxonomy, stats, paths.keys(), max_iters=1000)
    d0 = taxonomy.child(taxonomy.root, "domain", "D0")
    # K0 has 2 species, K9 has 1: exactly one eligible child
    assert model.pass_through[d0] == taxonomy.child(d0, "kingdom", "K0")
    k9 = taxonomy.child(d0, "kingdom", "K9")
    assert k9 in model.untrainable
    predicted = predict_lineage(model, stats["a3"])
    assert predicted.names()[:2] == ("D0", "K0")  # forced through K0


def test_hierarchy_root_must_be_trainable():
    paths = {
        "a1": ["D0", "K0", "P0", "C0", "O0", "F0"],
        "b1": ["D1", "KA", "PA", "CA", "OA", "FA"],
        "b2": ["D2", "KB", "PB", "CB", "OB", "FB"],
    }
    stats = {s: sv(10.0) for s in paths}
    taxonomy = build_from_canonical(sorted(paths.items()))
    with pytest.raises(ConfigurationError):
        train_hierarchy(taxonomy, stats, paths.keys(), max_iters=100)


def test_hierarchy_validates_inputs():
    taxonomy, stats = taxonomy_fixture()
    with pytest.raises(DataError):
        train_hierarchy(taxonomy, stats, list(stats) + ["ghost"],
                        max_iters=100)
    incomplete = dict(stats)
    del incomplete["x000"]
    with pytest.raises(DataError):
        train_hierarchy(taxonomy, incomplete, stats.keys(), max_iters=100)
    with pytest.raises(DomainError):
        train_hierarchy(taxonomy, stats, ["x000"], max_iters=100)


def test_evaluate_lineage_reports_levels_and_nodes():
    taxonomy, stats = taxonomy_fixture(per_leaf=5)
    report = evaluate_lineage(taxonomy, stats, k=4, max_iters=1200)
    assert report.total == 20
    accs = [lvl.cumulative_accuracy for lvl in report.levels]
    assert all(b <= a + 1e-12 for a, b in zip(accs, accs[1:]))
    assert [lvl.rank for lvl in report.levels] == list(
        ("domain", "kingdom", "phylum", "class", "order", "family"))
    assert report.levels[0].num_correct >= 18  # domains are well separated
    assert report.full_correct == report.levels[-1].num_correct
    by_name = {n.name: n for n in report.nodes}
    root = by_name["cellular organisms"]
    assert root.rank == "root"
    assert root.num_species == 20 and root.num_evaluated == 20
    assert root.cv_accuracy >= 0.9
    assert by_name["D0"].num_species == 10
    # pass-through chains are always correct
    assert by_name["K00"].cv_accuracy == 1.0


def test_evaluate_lineage_csv_outputs():
    taxonomy, stats = taxonomy_fixture()
    report = evaluate_lineage(taxonomy, stats, k=4, max_iters=800)
    nodes_buf, levels_buf = io.StringIO(), io.StringIO()
    write_nodes_csv(report, nodes_buf)
    write_levels_csv(report, levels_buf)
    nodes_lines = nodes_buf.getvalue().splitlines()
    levels_lines = levels_buf.getvalue().splitlines()
    assert nodes_lines[0] == NODES_CSV_HEADER
    assert levels_lines[0] == LEVELS_CSV_HEADER
    assert len(levels_lines) == 7
    first = levels_lines[1].split(",")
    assert first[0] == "1" and first[1] == "domain"
    assert first[3] == "16"


def test_hierarchy_json_round_trip():
    taxonomy, stats = taxonomy_fixture()
    model = train_hierarchy(taxonomy, stats, stats.keys(), max_iters=1200)
    text = dump_json(hierarchy_to_dict(model))
    back = hierarchy_from_dict(load_json(io.StringIO(text)))
    for s in taxonomy.species():
        assert (predict_lineage(back, stats[s]).names()
                == predict_lineage(model, stats[s]).names())
    assert dump_json(hierarchy_to_dict(back)) == text
    with pytest.raises(DataError):
        hierarchy_from_dict({"format": "predictor"})


# --- permutation test ------------------------------------------------------

def test_permutation_test_detects_group_signal():
    values = {f"s{i}": float(i % 2) * 10 + i * 0.01 for i in range(40)}
    groups = {f"s{i}": "even" if i % 2 == 0 else "odd" for i in range(40)}
    p = permutation_test(values, groups, n_perm=199, seed=0)
    assert p <= 0.01


def test_permutation_test_null_behavior():
    values = {f"s{i}": 5.0 for i in range(20)}
    groups = {f"s{i}": "a" if i < 10 else "b" for i in range(20)}
    assert permutation_test(values, groups, n_perm=99) == 1.0


def test_permutation_test_validates_inputs():
    values = {"a": 1.0, "b": 2.0}
    groups = {"a": "g1", "b": "g2"}
    with pytest.raises(DomainError):
        permutation_test(values, groups, n_perm=5)
    with pytest.raises(DataError):
        permutation_test(values, {"a": "g1", "c": "g2"})
    with pytest.raises(DomainError):
        permutation_test(values, {"a": "g1", "b": "g1"})


def test_permutation_test_is_seeded():
    rng = np.random.default_rng(5)
    values = {f"s{i}": float(v) for i, v in enumerate(rng.normal(size=30))}
    groups = {f"s{i}": "a" if i < 15 else "b" for i in range(30)}
    p1 = permutation_test(values, groups, n_perm=199, seed=4)
    assert p1 == permutation_test(values, groups, n_perm=199, seed=4)
    assert p1 > 0.05  # labels are independent of the values


# --- figure data ------------------------------------------------------------

def test_figure_data_rows_cover_tree_and_missing_cases():
    tree = parse_newick("((A:1,B:2):1,C)r;")
    stats = {"A": sv(10.0), "B": sv(20.0), "D": sv(30.0)}
    domains = {"A": "Bacteria", "B": "we,ird", "D": "Archaea"}
    rows = figure_data_rows(tree, stats, domains)
    assert [r[0] for r in rows] == ["A", "B", "D"]
    a_row = rows[0]
    assert a_row[1] == "Bacteria"
    assert a_row[2] == "2" and a_row[3] == "2"
    assert rows[1][1] == '"we,ird"'
    d_row = rows[2]
    assert d_row[2] == "" and d_row[3] == ""
    buf = io.StringIO()
    write_figure_data_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == FIGURE_DATA_HEADER
    assert len(lines[1].split(",")) == 4 + 19


def test_figure_data_weighted_blank_without_lengths():
    tree = parse_newick("((A:1,B)ab:1)r;")
    rows = figure_data_rows(tree, {"B": sv(1.0)}, {"B": "D"})
    assert rows[0][2] == "" and rows[0][3] == "2"
