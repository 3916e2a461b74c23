"""Command-line interface.

Subcommands: stats, features, predict-train, predict-eval,
classify-train, classify-eval, rfe, figure-data, permtest, map-trees,
taxonomy. Report subcommands additionally render a PNG next to each
CSV unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import os
import sys
from typing import IO, Iterable, Optional

from . import ingest, phylo, pipeline, taxonomy
from .errors import ConfigurationError, DataError, ToolError
from .features import (feature_matrix, global_stat_means,
                       write_features_csv)
from .ingest import EvidenceFilter, open_text
from .learn import rfe as run_rfe
from .pipeline import (dump_json, evaluate_lineage, evaluate_predictor,
                       figure_data_rows, hierarchy_from_dict,
                       hierarchy_to_dict, load_json, permutation_test,
                       predictor_from_dict, predictor_to_dict,
                       split_train_test, train_hierarchy, train_predictor,
                       write_figure_data_csv, write_levels_csv,
                       write_nodes_csv, write_predictions_csv,
                       write_predictor_report)
from .stats import (STAT_FIELDS, StatConfig, compute_stats, read_stats_csv,
                    write_stats_csv)
from .taxonomy import RANKS, build_from_canonical, read_lineage_tsv

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code map."""

    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppistats",
                     description="Protein-interaction network statistics, "
                                 "their phylogeny-based prediction, and "
                                 "taxonomic lineage classification.")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for every randomized step (default 0)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for the stats subcommand")
    parser.add_argument("--exact-threshold", type=int, default=2000,
                        help="max component size for exact pairwise "
                             "distances (default 2000)")
    parser.add_argument("--evidence", default="experimental,database",
                        help="comma-separated evidence channels that "
                             "qualify an edge")
    parser.add_argument("--min-combined-score", type=int, default=0,
                        help="minimum combined score for an edge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="compute the 19 statistics of one "
                                     "or more interaction networks")
    p.add_argument("links", nargs="+",
                   help="protein-links files (.gz accepted)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("features",
                       help="emit sibling/cousin feature vectors")
    p.add_argument("--stats", required=True, help="statistics CSV")
    p.add_argument("--tree", required=True, help="phylogeny (newick)")
    p.add_argument("--train-list", required=True,
                   help="file listing the species whose statistics may "
                        "be consulted")
    p.add_argument("--species-list",
                   help="species to emit (default: all in the stats CSV)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser("predict-train",
                       help="train per-statistic regressors")
    p.add_argument("--stats", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--train-list",
                   help="explicit train species (default: seeded "
                        "fraction split of all species)")
    p.add_argument("--fraction", type=float, default=0.8,
                   help="train fraction for the automatic split")
    p.add_argument("--C", type=float, default=100.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(handler=cmd_predict_train)

    p = sub.add_parser("predict-eval",
                       help="report relative errors on test species")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--stats", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--test-list",
                   help="test species (default: recorded in the model)")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--predictions", help="optional predictions CSV path")
    p.add_argument("--no-figures", action="store_true",
                   help="skip the PNG next to the report")
    p.set_defaults(handler=cmd_predict_eval)

    p = sub.add_parser("classify-train",
                       help="train the lineage classifier hierarchy")
    p.add_argument("--stats", required=True)
    p.add_argument("--lineages", required=True, help="six-rank TSV")
    p.add_argument("--train-list",
                   help="train species (default: all lineage species)")
    p.add_argument("--C", type=float, default=100.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(handler=cmd_classify_train)

    p = sub.add_parser("classify-eval",
                       help="cross-validate the lineage classifier")
    p.add_argument("--stats", required=True)
    p.add_argument("--lineages", required=True, help="six-rank TSV")
    p.add_argument("--cv-k", type=int, default=5)
    p.add_argument("--C", type=float, default=100.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out-nodes", required=True,
                   help="per-node accuracy CSV path")
    p.add_argument("--out-levels", required=True,
                   help="cumulative per-level accuracy CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=cmd_classify_eval)

    p = sub.add_parser("rfe", help="recursive feature elimination for "
                                   "one taxonomic rank")
    p.add_argument("--stats", required=True)
    p.add_argument("--lineages", required=True, help="six-rank TSV")
    p.add_argument("--rank", default="domain", choices=RANKS)
    p.add_argument("--cv-k", type=int, default=5)
    p.add_argument("--C", type=float, default=100.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=cmd_rfe)

    p = sub.add_parser("figure-data",
                       help="per-species table of tree position, domain "
                            "and statistics")
    p.add_argument("--stats", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--lineages", help="six-rank TSV for domain labels")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=cmd_figure_data)

    p = sub.add_parser("permtest",
                       help="permutation test of one statistic against "
                            "one taxonomic rank")
    p.add_argument("--stats", required=True)
    p.add_argument("--lineages", required=True, help="six-rank TSV")
    p.add_argument("--statistic", required=True, choices=STAT_FIELDS)
    p.add_argument("--rank", default="domain", choices=RANKS)
    p.add_argument("--n-perm", type=int, default=999)
    p.add_argument("--out", help="optional one-row CSV path")
    p.set_defaults(handler=cmd_permtest)

    p = sub.add_parser("map-trees",
                       help="match species to another tree's leaves by "
                            "scientific name")
    p.add_argument("--names", required=True,
                   help="TSV species_id<TAB>scientific name")
    p.add_argument("--target-tree", required=True, help="newick file")
    p.add_argument("--lineages",
                   help="raw lineage TSV used to break name ties")
    p.add_argument("--out", required=True, help="audit TSV path")
    p.set_defaults(handler=cmd_map_trees)

    p = sub.add_parser("taxonomy",
                       help="canonicalize raw lineages to the six-rank "
                            "TSV")
    p.add_argument("--lineage-table",
                   help="raw TSV species_id<TAB>name;name;...")
    p.add_argument("--taxdump-nodes", help="NCBI nodes.dmp")
    p.add_argument("--taxdump-names", help="NCBI names.dmp")
    p.add_argument("--taxids", help="file restricting taxdump species")
    p.add_argument("--rank-table",
                   help="TSV name<TAB>rank overriding rank resolution")
    p.add_argument("--out", required=True, help="six-rank TSV path")
    p.add_argument("--rejected", help="TSV of rejected species + reason")
    p.set_defaults(handler=cmd_taxonomy)

    return parser


def _evidence_filter(args) -> EvidenceFilter:
    channels = frozenset(c.strip() for c in args.evidence.split(",")
                         if c.strip())
    return EvidenceFilter(required_channels=channels,
                          min_combined_score=args.min_combined_score)


def _stat_config(args) -> StatConfig:
    return StatConfig(seed=args.seed,
                      exact_threshold=args.exact_threshold)


def _read_list(path: str) -> list[str]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token and not token.startswith("#"):
                out.append(token)
    return out


def _read_stats(path: str):
    with open_text(path) as fh:
        return read_stats_csv(fh)


def _read_tree(path: str) -> phylo.PhyloTree:
    with open_text(path) as fh:
        return phylo.load_newick(fh)


def _read_taxonomy(path: str) -> taxonomy.TaxonomyTree:
    with open_text(path) as fh:
        return build_from_canonical(read_lineage_tsv(fh))


def _read_names_tsv(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected "
                                f"species_id<TAB>name")
            out[parts[0]] = parts[1]
    return out


def _figure_path(out_path: str) -> str:
    stem, _ = os.path.splitext(out_path)
    return stem + ".png"


def _stats_job(job):
    path, channels, min_score, seed, exact_threshold = job
    filt = EvidenceFilter(required_channels=frozenset(channels),
                          min_combined_score=min_score)
    with open_text(path) as fh:
        graph = ingest.parse_string_links(fh, filt)
    cfg = StatConfig(seed=seed, exact_threshold=exact_threshold)
    return graph.species_id, compute_stats(graph, cfg)


def cmd_stats(args) -> None:
    filt = _evidence_filter(args)
    jobs = [(path, tuple(sorted(filt.required_channels)),
             filt.min_combined_score, args.seed, args.exact_threshold)
            for path in args.links]
    if args.threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=args.threads) as pool:
            results = list(pool.map(_stats_job, jobs))
    else:
        results = [_stats_job(job) for job in jobs]
    seen: dict[str, str] = {}
    for (species_id, _), job in zip(results, jobs):
        if species_id in seen:
            raise DataError(f"species {species_id} appears in both "
                            f"{seen[species_id]} and {job[0]}")
        seen[species_id] = job[0]
    results.sort(key=lambda item: item[0])
    with open(args.out, "w", encoding="utf-8") as fh:
        write_stats_csv(results, fh)


def cmd_features(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_tree(args.tree)
    train = set(_read_list(args.train_list))
    species = (sorted(_read_list(args.species_list))
               if args.species_list else sorted(stats))
    vectors = feature_matrix(tree, stats, species, train)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_features_csv(vectors, fh)


def cmd_predict_train(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_tree(args.tree)
    if args.train_list:
        train = _read_list(args.train_list)
        test: Optional[list[str]] = None
    else:
        train, test = split_train_test(sorted(stats), args.fraction,
                                       args.seed)
    model = train_predictor(tree, stats, train, C=args.C, seed=args.seed,
                            max_iters=args.max_iters, test_species=test)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dump_json(predictor_to_dict(model)))


def cmd_predict_eval(args) -> None:
    with open(args.model, encoding="utf-8") as fh:
        model = predictor_from_dict(load_json(fh))
    stats = _read_stats(args.stats)
    tree = _read_tree(args.tree)
    if args.test_list:
        test = _read_list(args.test_list)
    elif model.test_species is not None:
        test = list(model.test_species)
    else:
        raise ConfigurationError("no --test-list given and the model "
                                 "records no test split")
    report, predictions = evaluate_predictor(model, tree, stats, test)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_predictor_report(report, fh)
    if args.predictions:
        with open(args.predictions, "w", encoding="utf-8") as fh:
            write_predictions_csv(predictions, fh)
    if not args.no_figures:
        from . import plots
        plots.render_predictor_report(report, _figure_path(args.out))


def cmd_classify_train(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_taxonomy(args.lineages)
    train = (_read_list(args.train_list) if args.train_list
             else tree.species())
    model = train_hierarchy(tree, stats, train, C=args.C, seed=args.seed,
                            max_iters=args.max_iters)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dump_json(hierarchy_to_dict(model)))


def cmd_classify_eval(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_taxonomy(args.lineages)
    report = evaluate_lineage(tree, stats, k=args.cv_k, seed=args.seed,
                              C=args.C, max_iters=args.max_iters)
    with open(args.out_nodes, "w", encoding="utf-8") as fh:
        write_nodes_csv(report, fh)
    with open(args.out_levels, "w", encoding="utf-8") as fh:
        write_levels_csv(report, fh)
    print(f"full lineage correct for {report.full_correct} of "
          f"{report.total} species")
    if not args.no_figures:
        from . import plots
        plots.render_nodes(report, _figure_path(args.out_nodes))
        plots.render_levels(report, _figure_path(args.out_levels))


def _rank_labels(tree: taxonomy.TaxonomyTree, species: Iterable[str],
                 rank: str) -> list[str]:
    level = RANKS.index(rank)
    return [tree.lineage_of(s).names()[level] for s in species]


def cmd_rfe(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_taxonomy(args.lineages)
    species = [s for s in tree.species() if s in stats]
    if not species:
        raise DataError("no species with both statistics and lineage")
    means = global_stat_means(stats, species)
    X = [pipeline.impute_stat_row(stats[s], means) for s in species]
    y = _rank_labels(tree, species, args.rank)
    results = run_rfe(X, y, C=args.C, cv_k=args.cv_k, seed=args.seed,
                      max_iters=args.max_iters)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("num_features,cv_accuracy,eliminated_feature\n")
        for size, accuracy, feature in results:
            fh.write(f"{size},{format(accuracy, '.10g')},"
                     f"{STAT_FIELDS[feature]}\n")
    if not args.no_figures:
        from . import plots
        plots.render_rfe(results, _figure_path(args.out))


def cmd_figure_data(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_tree(args.tree)
    domains: dict[str, str] = {}
    if args.lineages:
        lineage_tree = _read_taxonomy(args.lineages)
        for s in lineage_tree.species():
            domains[s] = lineage_tree.lineage_of(s).names()[0]
    rows = figure_data_rows(tree, stats, domains)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_figure_data_csv(rows, fh)
    if not args.no_figures:
        from . import plots
        plots.render_figure_data(rows, _figure_path(args.out))


def cmd_permtest(args) -> None:
    stats = _read_stats(args.stats)
    tree = _read_taxonomy(args.lineages)
    level = RANKS.index(args.rank)
    values: dict[str, float] = {}
    groups: dict[str, str] = {}
    skipped = 0
    for s in tree.species():
        if s not in stats:
            continue
        value = getattr(stats[s], args.statistic)
        if value is None:
            skipped += 1
            continue
        values[s] = float(value)
        groups[s] = tree.lineage_of(s).names()[level]
    if skipped:
        logger.warning("skipped %d species with undefined %s", skipped,
                       args.statistic)
    p_value = permutation_test(values, groups, n_perm=args.n_perm,
                               seed=args.seed)
    print(f"p_value {format(p_value, '.10g')}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("statistic,rank,n,n_perm,seed,p_value\n")
            fh.write(f"{args.statistic},{args.rank},{len(values)},"
                     f"{args.n_perm},{args.seed},"
                     f"{format(p_value, '.10g')}\n")


def cmd_map_trees(args) -> None:
    names = _read_names_tsv(args.names)
    target = _read_tree(args.target_tree)
    lineages: Optional[dict[str, list[str]]] = None
    if args.lineages:
        with open_text(args.lineages) as fh:
            lineages = dict(ingest.parse_lineage_table(fh))
    rows = phylo.map_trees(names, target, lineages)
    with open(args.out, "w", encoding="utf-8") as fh:
        phylo.write_mapping_audit(rows, fh)


def cmd_taxonomy(args) -> None:
    if args.lineage_table and (args.taxdump_nodes or args.taxdump_names):
        raise ConfigurationError("give either --lineage-table or the "
                                 "taxdump pair, not both")
    if args.lineage_table:
        if not args.rank_table:
            raise ConfigurationError("--lineage-table requires "
                                     "--rank-table for rank resolution")
        with open_text(args.lineage_table) as fh:
            lineages = ingest.parse_lineage_table(fh)
        with open_text(args.rank_table) as fh:
            resolver = taxonomy.table_resolver(
                taxonomy.parse_rank_table(fh))
    elif args.taxdump_nodes and args.taxdump_names:
        taxids = _read_list(args.taxids) if args.taxids else None
        with open_text(args.taxdump_nodes) as nodes_fh:
            with open_text(args.taxdump_names) as names_fh:
                dump = ingest.load_taxdump(nodes_fh, names_fh)
        wanted = taxids if taxids is not None else sorted(dump.parent)
        lineages = [(taxid, dump.lineage(taxid)) for taxid in wanted]
        extra = None
        if args.rank_table:
            with open_text(args.rank_table) as fh:
                extra = taxonomy.parse_rank_table(fh)
        resolver = taxonomy.taxdump_resolver(dump, extra)
    else:
        raise ConfigurationError("need --lineage-table or both "
                                 "--taxdump-nodes and --taxdump-names")
    tree, rejected = taxonomy.build_taxonomy(lineages, resolver)
    with open(args.out, "w", encoding="utf-8") as fh:
        taxonomy.write_lineage_tsv(tree, fh)
    if rejected:
        logger.warning("rejected %d species lacking a full six-rank "
                       "lineage", len(rejected))
    if args.rejected:
        with open(args.rejected, "w", encoding="utf-8") as fh:
            for species_id, reason in rejected:
                fh.write(f"{species_id}\t{reason}\n")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.handler(args)
    except ToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
