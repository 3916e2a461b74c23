"""End-to-end workflows: train/test splitting, per-statistic regression
with relative-error reports, hierarchical lineage classification with
cross-validated reports, a permutation null test, and figure-data
export.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, DomainError
from .features import (FEATURE_NAMES, Standardizer, feature_matrix,
                       fit_standardizer, global_stat_means)
from .learn import (LinearModel, MulticlassModel, kfold_split,
                    linear_model_from_dict, linear_model_to_dict,
                    multiclass_from_dict, multiclass_to_dict, predict_svc,
                    predict_svr_batch, relative_error, train_svc, train_svr)
from .phylo import PhyloTree, root_distance
from .stats import STAT_FIELDS, StatVector, format_stat
from .taxonomy import (RANKS, ROOT_NAME, LineagePath, TaxonomyTree,
                       build_from_canonical)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def split_train_test(species: Sequence[str], fraction: float = 0.8,
                     seed: int = 0) -> tuple[list[str], list[str]]:
    """Seeded disjoint split with |train| = round(fraction·n)."""
    pool = sorted(species)
    if len(pool) < 5:
        raise DomainError(f"need at least 5 species to split, "
                          f"got {len(pool)}")
    if not 0.0 < fraction < 1.0:
        raise DomainError("split fraction must be in (0, 1)")
    random.Random(seed).shuffle(pool)
    n_train = int(round(fraction * len(pool)))
    n_train = min(max(n_train, 1), len(pool) - 1)
    return sorted(pool[:n_train]), sorted(pool[n_train:])


def impute_stat_row(v: StatVector, global_means: Sequence[float],
                    ) -> list[float]:
    """StatVector as 19 floats with undefined components imputed."""
    row = []
    for pos, name in enumerate(STAT_FIELDS):
        value = getattr(v, name)
        row.append(float(value) if value is not None
                   else float(global_means[pos]))
    return row


# ---------------------------------------------------------------------------
# statistic predictor


@dataclass(frozen=True)
class StatRelError:
    """Relative-error summary of one statistic over the test set."""

    statistic: str
    mean: Optional[float]
    std: Optional[float]
    n: int
    excluded: int


@dataclass(frozen=True)
class PredictorReport:
    rows: tuple[StatRelError, ...]


@dataclass(frozen=True)
class PredictorModel:
    """One regressor per statistic plus the shared feature scaler."""

    C: float
    seed: int
    train_species: tuple[str, ...]
    test_species: Optional[tuple[str, ...]]
    scaler: Standardizer
    models: dict[str, LinearModel]


def train_predictor(tree: PhyloTree, stats: dict[str, StatVector],
                    train: Iterable[str], C: float = 100.0, seed: int = 0,
                    max_iters: int = 5000, tol: float = 1e-6,
                    test_species: Optional[Iterable[str]] = None,
                    ) -> PredictorModel:
    """Fit one epsilon-insensitive regressor per statistic on
    sibling/cousin features of the train species."""
    train_list = sorted(train)
    vectors = feature_matrix(tree, stats, train_list, set(train_list))
    rows = [fv.values() for fv in vectors]
    scaler = fit_standardizer(rows)
    X = scaler.apply_matrix(rows)
    models: dict[str, LinearModel] = {}
    for stat in STAT_FIELDS:
        usable = [(i, float(getattr(stats[s], stat)))
                  for i, s in enumerate(train_list)
                  if getattr(stats[s], stat) is not None]
        if len(usable) < 2:
            raise DataError(f"fewer than 2 defined train targets for "
                            f"{stat}")
        idx = [i for i, _ in usable]
        y = [v for _, v in usable]
        models[stat] = train_svr(X[idx], y, C=C, seed=seed,
                                 max_iters=max_iters, tol=tol)
    return PredictorModel(C=C, seed=seed, train_species=tuple(train_list),
                          test_species=(tuple(sorted(test_species))
                                        if test_species is not None
                                        else None),
                          scaler=scaler, models=models)


def predictor_predictions(model: PredictorModel, tree: PhyloTree,
                          stats: dict[str, StatVector],
                          test: Iterable[str],
                          ) -> dict[str, dict[str, float]]:
    """Per-statistic predictions for the test species.

    Only train-set statistics are consulted, so test StatVectors may be
    absent entirely.
    """
    test_list = sorted(test)
    train_set = set(model.train_species)
    vectors = feature_matrix(tree, stats, test_list, train_set)
    X = model.scaler.apply_matrix([fv.values() for fv in vectors])
    out: dict[str, dict[str, float]] = {}
    for stat in STAT_FIELDS:
        values = predict_svr_batch(model.models[stat], X)
        out[stat] = dict(zip(test_list, values))
    return out


def evaluate_predictor(model: PredictorModel, tree: PhyloTree,
                       stats: dict[str, StatVector], test: Iterable[str],
                       ) -> tuple[PredictorReport,
                                  dict[str, dict[str, float]]]:
    test_list = sorted(test)
    predictions = predictor_predictions(model, tree, stats, test_list)
    rows = []
    for stat in STAT_FIELDS:
        errors = []
        excluded = 0
        for s in test_list:
            if s not in stats:
                raise DataError(f"no statistics for test species {s!r}")
            actual = getattr(stats[s], stat)
            if actual is None or float(actual) == 0.0:
                excluded += 1
                continue
            errors.append(relative_error(predictions[stat][s],
                                         float(actual)))
        if excluded:
            logger.warning("%s: excluded %d test species with zero or "
                           "undefined actual values", stat, excluded)
        mean = float(np.mean(errors)) if errors else None
        std = float(np.std(errors)) if errors else None
        rows.append(StatRelError(statistic=stat, mean=mean, std=std,
                                 n=len(errors), excluded=excluded))
    return PredictorReport(rows=tuple(rows)), predictions


def run_predictor(tree: PhyloTree, stats: dict[str, StatVector],
                  train: Iterable[str], test: Iterable[str],
                  C: float = 100.0, seed: int = 0, max_iters: int = 5000,
                  tol: float = 1e-6) -> PredictorReport:
    """Train on `train`, report mean/std relative error over `test`."""
    model = train_predictor(tree, stats, train, C=C, seed=seed,
                            max_iters=max_iters, tol=tol)
    report, _ = evaluate_predictor(model, tree, stats, test)
    return report


PREDICTOR_REPORT_HEADER = ("statistic,mean_relative_error,"
                           "std_relative_error,n,excluded")


def _fmt_real(value: Optional[float]) -> str:
    return "" if value is None else format(float(value), ".10g")


def write_predictor_report(report: PredictorReport,
                           stream: IO[str]) -> None:
    stream.write(PREDICTOR_REPORT_HEADER + "\n")
    for row in report.rows:
        stream.write(",".join([row.statistic, _fmt_real(row.mean),
                               _fmt_real(row.std), str(row.n),
                               str(row.excluded)]) + "\n")


PREDICTIONS_CSV_HEADER = "species_id," + ",".join(STAT_FIELDS)


def write_predictions_csv(predictions: dict[str, dict[str, float]],
                          stream: IO[str]) -> None:
    species = sorted(set().union(*[set(v) for v in predictions.values()]))
    stream.write(PREDICTIONS_CSV_HEADER + "\n")
    for s in species:
        row = [s] + [format(predictions[stat][s], ".10g")
                     for stat in STAT_FIELDS]
        stream.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# hierarchical lineage classifier


@dataclass(frozen=True)
class HierarchyModel:
    """Per-node classifiers over a TaxonomyTree.

    Internal nodes appear in exactly one of `classifiers` (trainable
    choice), `pass_through` (deterministic descent), or `untrainable`;
    `untrainable` additionally records children excluded for having
    fewer than 2 training species.
    """

    taxonomy: TaxonomyTree
    C: float
    seed: int
    global_means: tuple[float, ...]
    scaler: Standardizer
    classifiers: dict[int, MulticlassModel]
    pass_through: dict[int, int]
    untrainable: dict[int, str]
    training_counts: dict[int, dict[str, int]]


def train_hierarchy(taxonomy: TaxonomyTree, stats: dict[str, StatVector],
                    train: Iterable[str], C: float = 100.0, seed: int = 0,
                    max_iters: int = 5000, tol: float = 1e-6,
                    ) -> HierarchyModel:
    """Train one one-vs-rest classifier per branching taxonomy node.

    A child needs >= 2 training species to enter its parent's label
    set; a node with a single usable child becomes pass_through and a
    node with none is recorded untrainable.
    """
    train_list = sorted(set(train))
    if len(train_list) < 2:
        raise DomainError("hierarchy training needs >= 2 species")
    for s in train_list:
        if s not in taxonomy.species_assignments:
            raise DataError(f"train species {s!r} has no lineage")
        if s not in stats:
            raise DataError(f"train species {s!r} has no statistics")
    global_means = global_stat_means(stats, train_list)
    raw_rows = [impute_stat_row(stats[s], global_means)
                for s in train_list]
    scaler = fit_standardizer(raw_rows)
    std_rows = {s: scaler.apply(row)
                for s, row in zip(train_list, raw_rows)}

    by_node_child: dict[int, dict[int, list[str]]] = {}
    for s in train_list:
        chain = [taxonomy.root] + taxonomy.path_nodes(s)
        for level in range(len(RANKS)):
            (by_node_child.setdefault(chain[level], {})
             .setdefault(chain[level + 1], []).append(s))

    classifiers: dict[int, MulticlassModel] = {}
    pass_through: dict[int, int] = {}
    untrainable: dict[int, str] = {}
    training_counts: dict[int, dict[str, int]] = {}
    for node in sorted(by_node_child):
        groups = by_node_child[node]
        counts = {taxonomy.nodes[c].name: len(members)
                  for c, members in groups.items()}
        training_counts[node] = counts
        structural = taxonomy.nodes[node].children
        if len(structural) == 1:
            pass_through[node] = structural[0]
            continue
        eligible = sorted((c for c, members in groups.items()
                           if len(members) >= 2),
                          key=lambda c: taxonomy.nodes[c].name)
        for c in sorted(set(groups) - set(eligible)):
            untrainable[c] = (f"excluded at parent "
                              f"{taxonomy.nodes[node].name!r}: fewer "
                              f"than 2 training species")
        if len(eligible) >= 2:
            X = [std_rows[s] for c in eligible for s in groups[c]]
            y = [taxonomy.nodes[c].name for c in eligible
                 for _ in groups[c]]
            classifiers[node] = train_svc(X, y, C=C, seed=seed,
                                          max_iters=max_iters, tol=tol)
        elif len(eligible) == 1:
            pass_through[node] = eligible[0]
        else:
            untrainable[node] = "no child with >= 2 training species"
    root = taxonomy.root
    if root not in classifiers and root not in pass_through:
        raise ConfigurationError("root classifier is untrainable: " +
                                 untrainable.get(root, "no species"))
    return HierarchyModel(taxonomy=taxonomy, C=C, seed=seed,
                          global_means=tuple(global_means), scaler=scaler,
                          classifiers=classifiers,
                          pass_through=pass_through,
                          untrainable=untrainable,
                          training_counts=training_counts)


def predict_lineage(model: HierarchyModel, x: StatVector) -> LineagePath:
    """Descend the hierarchy; stop with a truncation marker at an
    untrainable node."""
    row = model.scaler.apply(impute_stat_row(x, model.global_means))
    taxonomy = model.taxonomy
    entries: list[tuple[str, str]] = []
    node = taxonomy.root
    for rank in RANKS:
        if node in model.classifiers:
            label = predict_svc(model.classifiers[node], row)
            child = taxonomy.child(node, rank, label)
            if child is None:
                raise DataError(f"classifier emitted unknown child "
                                f"{label!r} under "
                                f"{taxonomy.nodes[node].name!r}")
        elif node in model.pass_through:
            child = model.pass_through[node]
        else:
            return LineagePath(tuple(entries), truncated=True)
        entries.append((rank, taxonomy.nodes[child].name))
        node = child
    return LineagePath(tuple(entries))


@dataclass(frozen=True)
class NodeReport:
    """Cross-validated accuracy of one node's classifier."""

    name: str
    rank: str  # "root" for the root node
    num_species: int
    num_evaluated: int
    cv_accuracy: Optional[float]


@dataclass(frozen=True)
class LevelReport:
    rank: str
    num_correct: int
    cumulative_accuracy: float


@dataclass(frozen=True)
class LineageReport:
    nodes: tuple[NodeReport, ...]
    levels: tuple[LevelReport, ...]
    full_correct: int
    total: int


def evaluate_lineage(taxonomy: TaxonomyTree, stats: dict[str, StatVector],
                     k: int = 5, seed: int = 0, C: float = 100.0,
                     max_iters: int = 5000, tol: float = 1e-6,
                     ) -> LineageReport:
    """k-fold cross-validation of the hierarchy classifier.

    Each fold serves once as the test set. A species is cumulatively
    correct at a level iff all levels up to it match; truncated
    predictions score incorrect from the truncation point on.
    """
    species = taxonomy.species()
    missing = [s for s in species if s not in stats]
    if missing:
        raise DataError("statistics missing for species: "
                        + ", ".join(missing[:5]))
    folds = kfold_split(len(species), k, seed)
    level_correct = [0] * len(RANKS)
    full_correct = 0
    node_eval: dict[int, list[int]] = {}
    truth = {s: taxonomy.lineage_of(s).names() for s in species}
    for f, fold in enumerate(folds):
        test = [species[i] for i in fold]
        train = [species[i] for g, other in enumerate(folds) if g != f
                 for i in other]
        model = train_hierarchy(taxonomy, stats, train, C=C, seed=seed,
                                max_iters=max_iters, tol=tol)
        for s in test:
            predicted = predict_lineage(model, stats[s]).names()
            matched = True
            for level in range(len(RANKS)):
                matched = (matched and level < len(predicted)
                           and predicted[level] == truth[s][level])
                if matched:
                    level_correct[level] += 1
            if matched:
                full_correct += 1
            # isolated per-node decisions along the true path
            chain = [taxonomy.root] + taxonomy.path_nodes(s)
            row = model.scaler.apply(
                impute_stat_row(stats[s], model.global_means))
            for level in range(len(RANKS)):
                node, true_child = chain[level], chain[level + 1]
                if node in model.classifiers:
                    label = predict_svc(model.classifiers[node], row)
                    hit = label == taxonomy.nodes[true_child].name
                elif node in model.pass_through:
                    hit = model.pass_through[node] == true_child
                else:
                    continue
                record = node_eval.setdefault(node, [0, 0])
                record[0] += int(hit)
                record[1] += 1

    population: dict[int, int] = {}
    for s in species:
        for node in [taxonomy.root] + taxonomy.path_nodes(s)[:-1]:
            population[node] = population.get(node, 0) + 1
    nodes = []
    for node in sorted(population):
        correct, evaluated = node_eval.get(node, [0, 0])
        nodes.append(NodeReport(
            name=taxonomy.nodes[node].name,
            rank=taxonomy.nodes[node].rank or "root",
            num_species=population[node],
            num_evaluated=evaluated,
            cv_accuracy=(correct / evaluated) if evaluated else None))
    total = len(species)
    levels = tuple(LevelReport(rank=rank, num_correct=level_correct[i],
                               cumulative_accuracy=level_correct[i] / total)
                   for i, rank in enumerate(RANKS))
    return LineageReport(nodes=tuple(nodes), levels=levels,
                         full_correct=full_correct, total=total)


NODES_CSV_HEADER = "node,rank,num_species,num_evaluated,cv_accuracy"
LEVELS_CSV_HEADER = "level,rank,num_correct,total,cumulative_accuracy"


def write_nodes_csv(report: LineageReport, stream: IO[str]) -> None:
    stream.write(NODES_CSV_HEADER + "\n")
    for row in report.nodes:
        stream.write(",".join([_csv_field(row.name), row.rank,
                               str(row.num_species),
                               str(row.num_evaluated),
                               _fmt_real(row.cv_accuracy)]) + "\n")


def write_levels_csv(report: LineageReport, stream: IO[str]) -> None:
    stream.write(LEVELS_CSV_HEADER + "\n")
    for i, row in enumerate(report.levels, start=1):
        stream.write(",".join([str(i), row.rank, str(row.num_correct),
                               str(report.total),
                               _fmt_real(row.cumulative_accuracy)])
                     + "\n")


def _csv_field(value: str) -> str:
    if any(c in value for c in ",\"\n"):
        return '"' + value.replace('"', '""') + '"'
    return value


# ---------------------------------------------------------------------------
# permutation null test


def permutation_test(values: dict[str, float], groups: dict[str, str],
                     n_perm: int = 999, seed: int = 0) -> float:
    """Between-group variance permutation test.

    p = (1 + #{shuffles with statistic >= observed}) / (n_perm + 1).
    """
    if n_perm < 99:
        raise DomainError("n_perm must be >= 99")
    if set(values) != set(groups):
        raise DataError("values and groups cover different species")
    keys = sorted(values)
    if not keys:
        raise DomainError("empty input")
    by_group: dict[str, list[int]] = {}
    for i, s in enumerate(keys):
        by_group.setdefault(groups[s], []).append(i)
    if len(by_group) < 2:
        raise DomainError("permutation test needs >= 2 groups")
    data = [float(values[s]) for s in keys]
    n = len(data)
    index_sets = [by_group[g] for g in sorted(by_group)]

    def between_variance(vals: list[float]) -> float:
        grand = sum(vals) / n
        total = 0.0
        for idx in index_sets:
            group_mean = sum(vals[i] for i in idx) / len(idx)
            total += len(idx) * (group_mean - grand) ** 2
        return total / n

    observed = between_variance(data)
    rng = random.Random(seed)
    shuffled = list(data)
    hits = 0
    for _ in range(n_perm):
        rng.shuffle(shuffled)
        if between_variance(shuffled) >= observed:
            hits += 1
    return (1 + hits) / (n_perm + 1)


# ---------------------------------------------------------------------------
# figure data


FIGURE_DATA_HEADER = ("species_id,domain,root_distance_weighted,"
                      "root_depth_hops," + ",".join(STAT_FIELDS))


def figure_data_rows(tree: PhyloTree, stats: dict[str, StatVector],
                     domains: dict[str, str]) -> list[list[str]]:
    """One row per species: identity, domain, tree position, 19 stats."""
    rows = []
    for s in sorted(stats):
        domain = domains.get(s, "")
        if not domain:
            logger.warning("species %s has no domain label", s)
        if s in tree.leaf_index:
            hops = str(int(root_distance(tree, s, "hops")))
            try:
                weighted = format(root_distance(tree, s, "weighted"),
                                  ".10g")
            except DataError:
                logger.warning("species %s lacks branch lengths; "
                               "weighted distance omitted", s)
                weighted = ""
        else:
            logger.warning("species %s is not in the tree", s)
            hops = ""
            weighted = ""
        row = [s, _csv_field(domain), weighted, hops]
        row += [format_stat(name, getattr(stats[s], name))
                for name in STAT_FIELDS]
        rows.append(row)
    return rows


def write_figure_data_csv(rows: list[list[str]], stream: IO[str]) -> None:
    stream.write(FIGURE_DATA_HEADER + "\n")
    for row in rows:
        stream.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# model serialization


def _standardizer_to_dict(z: Standardizer) -> dict:
    return {"mean": list(z.mean), "std": list(z.std)}


def _standardizer_from_dict(doc: dict) -> Standardizer:
    return Standardizer(mean=tuple(float(v) for v in doc["mean"]),
                        std=tuple(float(v) for v in doc["std"]))


def predictor_to_dict(model: PredictorModel) -> dict:
    return {
        "format": "predictor",
        "version": FORMAT_VERSION,
        "C": model.C,
        "seed": model.seed,
        "train_species": list(model.train_species),
        "test_species": (list(model.test_species)
                         if model.test_species is not None else None),
        "feature_names": list(FEATURE_NAMES),
        "standardizer": _standardizer_to_dict(model.scaler),
        "models": {stat: linear_model_to_dict(m)
                   for stat, m in sorted(model.models.items())},
    }


def predictor_from_dict(doc: dict) -> PredictorModel:
    if doc.get("format") != "predictor":
        raise DataError("not a predictor model document")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    return PredictorModel(
        C=float(doc["C"]), seed=int(doc["seed"]),
        train_species=tuple(doc["train_species"]),
        test_species=(tuple(doc["test_species"])
                      if doc.get("test_species") is not None else None),
        scaler=_standardizer_from_dict(doc["standardizer"]),
        models={stat: linear_model_from_dict(d)
                for stat, d in doc["models"].items()})


def _node_key(taxonomy: TaxonomyTree, node: int) -> str:
    names = []
    cur: Optional[int] = node
    while cur is not None:
        names.append(taxonomy.nodes[cur].name)
        cur = taxonomy.nodes[cur].parent
    return "\t".join(reversed(names))


def _node_from_key(taxonomy: TaxonomyTree, key: str) -> int:
    parts = key.split("\t")
    if parts[0] != ROOT_NAME:
        raise DataError(f"node key {key!r} does not start at the root")
    node = taxonomy.root
    for level, name in enumerate(parts[1:]):
        child = taxonomy.child(node, RANKS[level], name)
        if child is None:
            raise DataError(f"node key {key!r} not present in taxonomy")
        node = child
    return node


def hierarchy_to_dict(model: HierarchyModel) -> dict:
    taxonomy = model.taxonomy
    lineages = [[s, list(taxonomy.lineage_of(s).names())]
                for s in taxonomy.species()]

    def key(node: int) -> str:
        return _node_key(taxonomy, node)

    return {
        "format": "hierarchy",
        "version": FORMAT_VERSION,
        "C": model.C,
        "seed": model.seed,
        "lineages": lineages,
        "global_means": list(model.global_means),
        "standardizer": _standardizer_to_dict(model.scaler),
        "classifiers": {key(n): multiclass_to_dict(m)
                        for n, m in sorted(model.classifiers.items())},
        "pass_through": {key(n): taxonomy.nodes[c].name
                         for n, c in sorted(model.pass_through.items())},
        "untrainable": {key(n): reason
                        for n, reason in sorted(model.untrainable.items())},
        "training_counts": {key(n): dict(sorted(counts.items()))
                            for n, counts
                            in sorted(model.training_counts.items())},
    }


def hierarchy_from_dict(doc: dict) -> HierarchyModel:
    if doc.get("format") != "hierarchy":
        raise DataError("not a hierarchy model document")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    taxonomy = build_from_canonical(
        (s, list(names)) for s, names in doc["lineages"])
    classifiers = {}
    for key, sub in doc["classifiers"].items():
        classifiers[_node_from_key(taxonomy, key)] = \
            multiclass_from_dict(sub)
    pass_through = {}
    for key, child_name in doc["pass_through"].items():
        node = _node_from_key(taxonomy, key)
        depth = len(key.split("\t")) - 1
        child = taxonomy.child(node, RANKS[depth], child_name)
        if child is None:
            raise DataError(f"pass-through child {child_name!r} missing "
                            f"under {key!r}")
        pass_through[node] = child
    untrainable = {_node_from_key(taxonomy, key): reason
                   for key, reason in doc["untrainable"].items()}
    training_counts = {_node_from_key(taxonomy, key): dict(counts)
                       for key, counts in doc["training_counts"].items()}
    return HierarchyModel(
        taxonomy=taxonomy, C=float(doc["C"]), seed=int(doc["seed"]),
        global_means=tuple(float(v) for v in doc["global_means"]),
        scaler=_standardizer_from_dict(doc["standardizer"]),
        classifiers=classifiers, pass_through=pass_through,
        untrainable=untrainable, training_counts=training_counts)


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_json(stream: IO[str]) -> dict:
    try:
        return json.load(stream)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid model JSON: {exc}") from None
