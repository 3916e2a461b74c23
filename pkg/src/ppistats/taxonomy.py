"""Six-rank taxonomic hierarchy built by merging lineage paths.

Raw lineages (root-to-species name chains) are canonicalized to the six
ranks domain, kingdom, phylum, class, order, family; unranked
intermediate levels are collapsed and species missing any rank are
rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Optional

from .errors import ConfigurationError, DataError, FormatError
from .ingest import Taxdump

RANKS = ("domain", "kingdom", "phylum", "class", "order", "family")
INTERMEDIATE = "intermediate"
ROOT_NAME = "cellular organisms"

# NCBI taxdumps label the top division "superkingdom" in older releases.
RANK_ALIASES = {"superkingdom": "domain"}

RankResolver = Callable[[str], str]


@dataclass(frozen=True)
class LineagePath:
    """A rank-prefix path (domain first); shorter than 6 only when a
    prediction was truncated."""

    entries: tuple[tuple[str, str], ...]
    truncated: bool = False

    def __post_init__(self):
        if not self.entries:
            raise DataError("empty lineage path")
        got = tuple(rank for rank, _ in self.entries)
        if got != RANKS[:len(got)]:
            raise DataError(f"lineage ranks {got} are not a prefix of "
                            f"{RANKS}")

    def names(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class TaxNode:
    name: str
    rank: Optional[str]
    parent: Optional[int]
    children: list[int] = field(default_factory=list)


class TaxonomyTree:
    """Rooted directed tree of ranked taxa; species hang off family
    nodes via `species_assignments`."""

    def __init__(self):
        self.nodes: list[TaxNode] = [TaxNode(ROOT_NAME, None, None)]
        self.root = 0
        self.species_assignments: dict[str, int] = {}
        self._child_index: list[dict[tuple[str, str], int]] = [{}]

    def child(self, node: int, rank: str, name: str) -> Optional[int]:
        return self._child_index[node].get((rank, name))

    def ensure_child(self, node: int, rank: str, name: str) -> int:
        existing = self.child(node, rank, name)
        if existing is not None:
            return existing
        idx = len(self.nodes)
        self.nodes.append(TaxNode(name, rank, node))
        self._child_index.append({})
        self.nodes[node].children.append(idx)
        self._child_index[node][(rank, name)] = idx
        return idx

    def path_nodes(self, species_id: str) -> list[int]:
        """Node indices of the species' path, domain first."""
        if species_id not in self.species_assignments:
            raise DataError(f"species {species_id!r} not in taxonomy")
        path: list[int] = []
        cur: Optional[int] = self.species_assignments[species_id]
        while cur is not None and cur != self.root:
            path.append(cur)
            cur = self.nodes[cur].parent
        path.reverse()
        return path

    def lineage_of(self, species_id: str) -> LineagePath:
        entries = tuple((self.nodes[i].rank, self.nodes[i].name)
                        for i in self.path_nodes(species_id))
        return LineagePath(entries)

    def species(self) -> list[str]:
        return sorted(self.species_assignments)


def table_resolver(table: dict[str, str]) -> RankResolver:
    """Resolver backed by an explicit name -> rank table."""
    canon: dict[str, str] = {}
    for name, rank in table.items():
        rank = RANK_ALIASES.get(rank, rank)
        if rank not in RANKS:
            raise ConfigurationError(
                f"rank table maps {name!r} to unknown rank {rank!r}")
        canon[name] = rank

    def resolve(name: str) -> str:
        return canon.get(name, INTERMEDIATE)

    return resolve


def taxdump_resolver(dump: Taxdump,
                     extra: dict[str, str] | None = None) -> RankResolver:
    """Resolver using taxdump ranks, optionally overridden by `extra`."""
    table = {name: RANK_ALIASES.get(rank, rank)
             for name, rank in dump.name_ranks().items()
             if RANK_ALIASES.get(rank, rank) in RANKS}
    if extra:
        for name, rank in extra.items():
            rank = RANK_ALIASES.get(rank, rank)
            if rank not in RANKS:
                raise ConfigurationError(
                    f"rank table maps {name!r} to unknown rank {rank!r}")
            table[name] = rank
    return table_resolver(table)


def canonicalize_path(raw_path: Iterable[str], resolver: RankResolver,
                      ) -> tuple[Optional[list[tuple[str, str]]], str]:
    """Collapse a raw name chain to the six ranks.

    Returns (entries, "") on success or (None, reason) when the path
    cannot yield a complete, ordered six-rank lineage.
    """
    entries: list[tuple[str, str]] = []
    for element in raw_path:
        rank = resolver(element)
        if rank == INTERMEDIATE:
            continue
        if rank not in RANKS:
            raise ConfigurationError(
                f"rank resolver returned unknown rank {rank!r} for "
                f"{element!r}")
        entries.append((rank, element))
    got = [rank for rank, _ in entries]
    if sorted(set(got), key=RANKS.index) != got:
        return None, f"ranks out of order or repeated: {got}"
    missing = [r for r in RANKS if r not in got]
    if missing:
        return None, "missing ranks: " + ", ".join(missing)
    return entries, ""


def _merge_paths(paths: Iterable[tuple[str, list[tuple[str, str]], list[str]]],
                 ) -> TaxonomyTree:
    tree = TaxonomyTree()
    canonical: dict[str, tuple[tuple[str, str], ...]] = {}
    raw_seen: dict[str, list[str]] = {}
    for species_id, entries, raw_path in paths:
        key = tuple(entries)
        if species_id in canonical:
            if canonical[species_id] != key:
                raise DataError(
                    f"species {species_id!r} has conflicting lineages: "
                    f"{raw_seen[species_id]!r} vs {raw_path!r}")
            continue
        canonical[species_id] = key
        raw_seen[species_id] = raw_path
        node = tree.root
        for rank, name in entries:
            node = tree.ensure_child(node, rank, name)
        tree.species_assignments[species_id] = node
    return tree


def build_taxonomy(lineages: Iterable[tuple[str, list[str]]],
                   resolver: RankResolver,
                   ) -> tuple[TaxonomyTree, list[tuple[str, str]]]:
    """Merge canonicalized lineages into a TaxonomyTree.

    Returns the tree plus a list of (species_id, reason) for species
    whose lineage does not cover all six ranks.
    """
    rejected: list[tuple[str, str]] = []
    accepted: list[tuple[str, list[tuple[str, str]], list[str]]] = []
    for species_id, raw_path in lineages:
        entries, reason = canonicalize_path(raw_path, resolver)
        if entries is None:
            rejected.append((species_id, reason))
        else:
            accepted.append((species_id, entries, list(raw_path)))
    return _merge_paths(accepted), rejected


def build_from_canonical(paths: Iterable[tuple[str, list[str]]],
                         ) -> TaxonomyTree:
    """Build a TaxonomyTree from already-canonical 6-name paths
    (e.g. read back from the lineage TSV)."""
    prepared = []
    for species_id, names in paths:
        if len(names) != len(RANKS):
            raise DataError(f"species {species_id!r}: expected "
                            f"{len(RANKS)} names, got {len(names)}")
        prepared.append((species_id, list(zip(RANKS, names)), list(names)))
    return _merge_paths(prepared)


LINEAGE_TSV_HEADER = "species_id\t" + "\t".join(RANKS)


def write_lineage_tsv(tree: TaxonomyTree, stream: IO[str]) -> None:
    stream.write(LINEAGE_TSV_HEADER + "\n")
    for species_id in tree.species():
        names = tree.lineage_of(species_id).names()
        stream.write(species_id + "\t" + "\t".join(names) + "\n")


def read_lineage_tsv(stream: Iterable[str]) -> list[tuple[str, list[str]]]:
    """Read the six-rank TSV back into build_taxonomy input form.

    The returned raw paths are already canonical, so they can be fed to
    build_taxonomy with a resolver that maps column position to rank.
    """
    lines = iter(stream)
    try:
        header = next(lines).rstrip("\n")
    except StopIteration:
        raise FormatError("empty lineage table") from None
    if header != LINEAGE_TSV_HEADER:
        raise FormatError(f"bad lineage table header {header!r}")
    out: list[tuple[str, list[str]]] = []
    for lineno, raw in enumerate(lines, start=2):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise FormatError(f"line {lineno}: expected 7 tab-separated "
                              f"fields, got {len(parts)}")
        out.append((parts[0], parts[1:]))
    return out


def parse_rank_table(stream: Iterable[str]) -> dict[str, str]:
    """Read a `name<TAB>rank` table for table_resolver."""
    table: dict[str, str] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"line {lineno}: expected `name<TAB>rank`")
        table[parts[0].strip()] = parts[1].strip()
    return table
