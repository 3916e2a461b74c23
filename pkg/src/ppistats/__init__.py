"""Whole-graph statistics of protein-interaction networks, their
prediction from phylogenetic-tree position, and taxonomic lineage
classification from those statistics.
"""

from .errors import (ConfigurationError, DataError, DegenerateModelError,
                     DomainError, FormatError, ToolError)
from .graph import Graph
from .ingest import (EvidenceFilter, filter_species, parse_lineage_table,
                     parse_pubcount_table, parse_string_links,
                     parse_taxdump)
from .stats import (StatConfig, StatVector, compute_stats, read_stats_csv,
                    write_stats_csv)
from .phylo import (NewickParseError, PhyloTree, cousins, load_newick,
                    map_trees, parse_newick, root_distance, siblings,
                    to_newick)
from .taxonomy import (RANKS, LineagePath, TaxonomyTree, build_taxonomy,
                       table_resolver)
from .features import (FeatureVector, Standardizer, assemble_features,
                       feature_matrix, fit_standardizer)
from .learn import (LinearModel, MulticlassModel, cross_val_accuracy,
                    kfold_split, predict_svc, predict_svr, relative_error,
                    rfe, train_svc, train_svr)
from .pipeline import (HierarchyModel, LineageReport, PredictorModel,
                       PredictorReport, evaluate_lineage,
                       evaluate_predictor, permutation_test,
                       predict_lineage, run_predictor, split_train_test,
                       train_hierarchy, train_predictor)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DataError", "DegenerateModelError",
    "DomainError", "FormatError", "ToolError", "Graph", "EvidenceFilter",
    "filter_species", "parse_lineage_table", "parse_pubcount_table",
    "parse_string_links", "parse_taxdump", "StatConfig", "StatVector",
    "compute_stats", "read_stats_csv", "write_stats_csv",
    "NewickParseError", "PhyloTree", "cousins", "load_newick",
    "map_trees", "parse_newick", "root_distance", "siblings", "to_newick",
    "RANKS", "LineagePath", "TaxonomyTree", "build_taxonomy",
    "table_resolver", "FeatureVector", "Standardizer",
    "assemble_features", "feature_matrix", "fit_standardizer",
    "LinearModel", "MulticlassModel", "cross_val_accuracy", "kfold_split",
    "predict_svc", "predict_svr", "relative_error", "rfe", "train_svc",
    "train_svr", "HierarchyModel", "LineageReport", "PredictorModel",
    "PredictorReport", "evaluate_lineage", "evaluate_predictor",
    "permutation_test", "predict_lineage", "run_predictor",
    "split_train_test", "train_hierarchy", "train_predictor",
    "__version__",
]
