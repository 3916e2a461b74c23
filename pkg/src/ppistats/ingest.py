"""Parsers for external data files: STRING protein links, publication
counts, lineage tables, and NCBI taxdump dumps.
"""

from __future__ import annotations

import gzip
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, TextIO

from .errors import DataError, DomainError, FormatError
from .graph import Graph

logger = logging.getLogger(__name__)

STRING_CHANNELS = ("neighborhood", "fusion", "cooccurence", "coexpression",
                   "experimental", "database", "textmining")

STRING_HEADER = ("protein1 protein2 neighborhood fusion cooccurence "
                 "coexpression experimental database textmining combined_score")


@dataclass(frozen=True)
class EvidenceFilter:
    """Edge-retention rule for STRING links.

    An edge is kept when at least one required channel has a positive
    score and the combined score clears the minimum. With no required
    channels, only the combined-score threshold applies.
    """

    required_channels: frozenset[str] = field(
        default_factory=lambda: frozenset({"experimental", "database"}))
    min_combined_score: int = 0

    def __post_init__(self):
        unknown = self.required_channels - set(STRING_CHANNELS)
        if unknown:
            raise DataError(f"unknown evidence channels: {sorted(unknown)}")
        if self.min_combined_score < 0:
            raise DataError("min_combined_score must be >= 0")
        if not self.required_channels and self.min_combined_score <= 0:
            raise DataError(
                "evidence filter needs at least one channel or a positive "
                "combined-score threshold")

    def keeps(self, channel_scores: dict[str, int], combined: int) -> bool:
        if combined < self.min_combined_score:
            return False
        if not self.required_channels:
            return True
        return any(channel_scores[c] > 0 for c in self.required_channels)


def open_text(path: str | Path) -> TextIO:
    """Open a text file, transparently decompressing .gz."""
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def _split_protein_id(token: str, lineno: int) -> tuple[str, str]:
    taxid, sep, protein = token.partition(".")
    if not sep or not taxid or not protein:
        raise FormatError(
            f"line {lineno}: protein id {token!r} lacks a taxid. prefix")
    return taxid, protein


def parse_string_links(stream: Iterable[str],
                       evidence: EvidenceFilter | None = None) -> Graph:
    """Parse a STRING protein-links file into a filtered Graph.

    Keeps an undirected edge when the evidence filter accepts any of its
    listed directions. Proteins that appear only on dropped lines are
    absent from the graph.
    """
    if evidence is None:
        evidence = EvidenceFilter()
    lines = iter(stream)
    try:
        header = next(lines).strip()
    except StopIteration:
        raise FormatError("empty file: missing STRING header") from None
    if header.split() != STRING_HEADER.split():
        raise FormatError(
            f"bad STRING header: expected {STRING_HEADER!r}, got {header!r}")

    species_id: str | None = None
    kept: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(lines, start=2):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 10:
            raise FormatError(
                f"line {lineno}: expected 10 fields, got {len(fields)}")
        tax1, prot1 = _split_protein_id(fields[0], lineno)
        tax2, prot2 = _split_protein_id(fields[1], lineno)
        for tax in (tax1, tax2):
            if species_id is None:
                species_id = tax
            elif tax != species_id:
                raise DataError(
                    f"line {lineno}: mixed taxids {species_id} and {tax}")
        try:
            scores = [int(x) for x in fields[2:]]
        except ValueError:
            raise FormatError(
                f"line {lineno}: non-integer score field") from None
        channel_scores = dict(zip(STRING_CHANNELS, scores[:7]))
        if evidence.keeps(channel_scores, scores[7]):
            if prot1 != prot2:
                kept.add((prot1, prot2) if prot1 < prot2 else (prot2, prot1))
    if species_id is None:
        raise FormatError("STRING file has a header but no data lines")
    return Graph.from_edges(species_id, kept)


def write_string_links(g: Graph, stream: IO[str],
                       experimental: int = 1000) -> None:
    """Write a Graph back out in the STRING links format.

    Every edge gets the given experimental score and an equal combined
    score; all other channels are 0. Re-parsing with the default filter
    reconstructs the graph exactly.
    """
    stream.write(STRING_HEADER + "\n")
    sid = g.species_id
    for i, j in g.edges():
        a, b = g.node_ids[i], g.node_ids[j]
        stream.write(f"{sid}.{a} {sid}.{b} 0 0 0 0 {experimental} 0 0 "
                     f"{experimental}\n")


def parse_pubcount_table(stream: Iterable[str]) -> dict[str, int]:
    """Parse TSV lines `species_id<TAB>count`; last duplicate wins."""
    counts: dict[str, int] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(
                f"line {lineno}: expected species_id<TAB>count")
        sid = parts[0].strip()
        try:
            count = int(parts[1].strip())
        except ValueError:
            raise FormatError(
                f"line {lineno}: non-integer count {parts[1]!r}") from None
        if sid in counts:
            logger.warning("duplicate publication count for %s: "
                           "keeping last value %d", sid, count)
        counts[sid] = count
    return counts


def filter_species(pubcounts: dict[str, int], threshold: int) -> set[str]:
    """Species with strictly more publications than the threshold."""
    if threshold < 0:
        raise DomainError("publication threshold must be >= 0")
    return {sid for sid, n in pubcounts.items() if n > threshold}


def parse_lineage_table(stream: Iterable[str]) -> list[tuple[str, list[str]]]:
    """Parse TSV lines `species_id<TAB>name1;...;nameK` (root first)."""
    out: list[tuple[str, list[str]]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(
                f"line {lineno}: expected species_id<TAB>lineage")
        sid = parts[0].strip()
        names = [name.strip() for name in parts[1].split(";")]
        names = [name for name in names if name]
        if not names:
            raise FormatError(f"line {lineno}: empty lineage path")
        out.append((sid, names))
    return out


@dataclass
class Taxdump:
    """Parsed NCBI taxdump: parent pointers, ranks, scientific names."""

    parent: dict[str, str]
    rank: dict[str, str]
    name: dict[str, str]

    def lineage(self, taxid: str) -> list[str]:
        """Scientific names from the root down to `taxid`."""
        chain: list[str] = []
        seen: set[str] = set()
        cur = taxid
        while True:
            if cur in seen:
                raise DataError(f"cycle in taxdump parent pointers at {cur}")
            seen.add(cur)
            if cur not in self.parent:
                raise DataError(f"taxid {cur} has no nodes.dmp record")
            if cur not in self.name:
                raise DataError(f"taxid {cur} has no scientific name")
            chain.append(self.name[cur])
            parent = self.parent[cur]
            if parent == cur:
                break
            cur = parent
        chain.reverse()
        return chain

    def name_ranks(self) -> dict[str, str]:
        """Scientific name -> rank, for building a rank resolver."""
        return {self.name[t]: r for t, r in self.rank.items()
                if t in self.name}


def _dmp_records(stream: Iterable[str]) -> Iterable[list[str]]:
    for raw in stream:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.endswith("\t|"):
            line = line[:-2]
        yield [f.strip() for f in line.split("\t|\t")]


def load_taxdump(nodes_stream: Iterable[str],
                 names_stream: Iterable[str]) -> Taxdump:
    """Read nodes.dmp / names.dmp into a Taxdump."""
    parent: dict[str, str] = {}
    rank: dict[str, str] = {}
    for rec in _dmp_records(nodes_stream):
        if len(rec) < 3:
            raise FormatError("nodes.dmp record with fewer than 3 fields")
        parent[rec[0]] = rec[1]
        rank[rec[0]] = rec[2]
    name: dict[str, str] = {}
    for rec in _dmp_records(names_stream):
        if len(rec) < 4:
            raise FormatError("names.dmp record with fewer than 4 fields")
        taxid, name_txt, name_class = rec[0], rec[1], rec[3]
        if name_class == "scientific name":
            name[taxid] = name_txt
    return Taxdump(parent=parent, rank=rank, name=name)


def parse_taxdump(nodes_stream: Iterable[str], names_stream: Iterable[str],
                  taxids: Iterable[str] | None = None,
                  ) -> list[tuple[str, list[str]]]:
    """Extract root-to-taxid lineages of scientific names from a taxdump.

    With `taxids` unset, every taxid in nodes.dmp gets a lineage.
    """
    dump = load_taxdump(nodes_stream, names_stream)
    wanted = sorted(dump.parent) if taxids is None else list(taxids)
    return [(t, dump.lineage(t)) for t in wanted]
