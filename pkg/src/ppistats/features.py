"""Predictor features: means of network statistics over tree siblings
and cousins, plus train-set standardization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, DomainError
from .phylo import PhyloTree, cousins, siblings
from .stats import STAT_FIELDS, StatVector

FEATURE_NAMES = tuple([f"sib_{f}" for f in STAT_FIELDS]
                      + [f"cuz_{f}" for f in STAT_FIELDS])

FEATURES_CSV_HEADER = ("species_id," + ",".join(FEATURE_NAMES)
                       + ",n_siblings,n_cousins,flags")

SIBLING_FALLBACK = "sibling_fallback"
COUSIN_FALLBACK = "cousin_fallback"


@dataclass(frozen=True)
class FeatureVector:
    """38 features for one species: 19 sibling means then 19 cousin
    means, with provenance of how the relative sets were formed."""

    species_id: str
    sibling_means: tuple[float, ...]
    cousin_means: tuple[float, ...]
    n_siblings: int
    n_cousins: int
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.sibling_means) != len(STAT_FIELDS):
            raise DomainError("sibling_means must have 19 components")
        if len(self.cousin_means) != len(STAT_FIELDS):
            raise DomainError("cousin_means must have 19 components")

    def values(self) -> list[float]:
        return list(self.sibling_means) + list(self.cousin_means)


def _component_mean(vectors: Sequence[StatVector],
                    fallback: Sequence[float]) -> tuple[float, ...]:
    """Componentwise mean; None components are excluded from their mean
    and fall back to `fallback` when no vector defines them."""
    out: list[float] = []
    for pos, name in enumerate(STAT_FIELDS):
        values = [float(getattr(v, name)) for v in vectors
                  if getattr(v, name) is not None]
        out.append(sum(values) / len(values) if values else fallback[pos])
    return tuple(out)


def global_stat_means(stats: dict[str, StatVector],
                      train: Iterable[str]) -> tuple[float, ...]:
    """Train-set componentwise mean, used to impute empty relative sets
    (all-None components degrade to 0, which standardizes away)."""
    members = sorted(train)
    missing = [s for s in members if s not in stats]
    if missing:
        raise DataError("statistics missing for train species: "
                        + ", ".join(missing))
    if not members:
        raise DomainError("empty train set")
    zeros = (0.0,) * len(STAT_FIELDS)
    return _component_mean([stats[s] for s in members], zeros)


def _relative_mean(relatives: set[str], stats: dict[str, StatVector],
                   global_means: Sequence[float],
                   ) -> tuple[tuple[float, ...], bool]:
    if not relatives:
        return tuple(global_means), True
    missing = sorted(r for r in relatives if r not in stats)
    if missing:
        raise DataError("statistics missing for train species: "
                        + ", ".join(missing))
    members = [stats[r] for r in sorted(relatives)]
    return _component_mean(members, global_means), False


def sibling_features(tree: PhyloTree, stats: dict[str, StatVector],
                     species: str, train: set[str],
                     global_means: Optional[Sequence[float]] = None,
                     ) -> tuple[float, ...]:
    """Mean statistics over siblings(tree, species, train)."""
    if global_means is None:
        global_means = global_stat_means(stats, train)
    means, _ = _relative_mean(siblings(tree, species, train), stats,
                              global_means)
    return means


def cousin_features(tree: PhyloTree, stats: dict[str, StatVector],
                    species: str, train: set[str],
                    global_means: Optional[Sequence[float]] = None,
                    ) -> tuple[float, ...]:
    """Mean statistics over cousins(tree, species, train)."""
    if global_means is None:
        global_means = global_stat_means(stats, train)
    means, _ = _relative_mean(cousins(tree, species, train), stats,
                              global_means)
    return means


def assemble_features(tree: PhyloTree, stats: dict[str, StatVector],
                      species: str, train: set[str],
                      global_means: Optional[Sequence[float]] = None,
                      ) -> FeatureVector:
    """Full 38-component feature vector for one species.

    Only train-set statistics are consulted, so a species never
    contributes to its own features.
    """
    if global_means is None:
        global_means = global_stat_means(stats, train)
    sib_set = siblings(tree, species, train)
    cuz_set = cousins(tree, species, train)
    sib_means, sib_fb = _relative_mean(sib_set, stats, global_means)
    cuz_means, cuz_fb = _relative_mean(cuz_set, stats, global_means)
    flags = set()
    if sib_fb:
        flags.add(SIBLING_FALLBACK)
    if cuz_fb:
        flags.add(COUSIN_FALLBACK)
    return FeatureVector(species_id=species, sibling_means=sib_means,
                         cousin_means=cuz_means, n_siblings=len(sib_set),
                         n_cousins=len(cuz_set), flags=frozenset(flags))


def feature_matrix(tree: PhyloTree, stats: dict[str, StatVector],
                   species_list: Sequence[str], train: set[str],
                   ) -> list[FeatureVector]:
    """Feature vectors for `species_list`, sharing one global-mean pass."""
    global_means = global_stat_means(stats, train)
    return [assemble_features(tree, stats, s, train, global_means)
            for s in species_list]


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-scoring fitted on the train set; constant features
    pass through as 0."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def apply(self, x: Sequence[float]) -> list[float]:
        if len(x) != len(self.mean):
            raise DomainError(f"expected {len(self.mean)} features, "
                              f"got {len(x)}")
        return [(float(v) - m) / s if s > 0.0 else 0.0
                for v, m, s in zip(x, self.mean, self.std)]

    def apply_matrix(self, rows: Sequence[Sequence[float]]) -> np.ndarray:
        return np.array([self.apply(r) for r in rows], dtype=float)


def fit_standardizer(rows: Sequence[Sequence[float]]) -> Standardizer:
    """Fit per-feature mean and population std over the rows."""
    if len(rows) < 2:
        raise DomainError("standardizer needs at least 2 rows")
    data = np.array(rows, dtype=float)
    if not np.isfinite(data).all():
        raise DomainError("non-finite feature value")
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    return Standardizer(mean=tuple(float(m) for m in mean),
                        std=tuple(float(s) for s in std))


def _fmt(value: float) -> str:
    return format(float(value), ".10g")


def write_features_csv(rows: Iterable[FeatureVector],
                       stream: IO[str]) -> None:
    stream.write(FEATURES_CSV_HEADER + "\n")
    for fv in rows:
        fields = ([fv.species_id]
                  + [_fmt(v) for v in fv.values()]
                  + [str(fv.n_siblings), str(fv.n_cousins),
                     ";".join(sorted(fv.flags))])
        stream.write(",".join(fields) + "\n")
