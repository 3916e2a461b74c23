"""Immutable simple undirected graph of protein nodes for one species."""

from __future__ import annotations

from bisect import bisect_left
from typing import Iterable, Iterator, Sequence

from .errors import DataError


class Graph:
    """Simple undirected graph with dense integer indices.

    Node identifiers are kept sorted, so construction from the same edge
    set always yields the same index assignment regardless of input
    order. Adjacency lists are sorted neighbor indices; no self-loops,
    no duplicate edges.
    """

    __slots__ = ("species_id", "node_ids", "adj", "edge_count", "_index")

    def __init__(self, species_id: str, node_ids: Sequence[str],
                 adj: Sequence[Sequence[int]], edge_count: int):
        self.species_id = species_id
        self.node_ids = list(node_ids)
        self.adj = [list(a) for a in adj]
        self.edge_count = edge_count
        self._index = {name: i for i, name in enumerate(self.node_ids)}

    @classmethod
    def from_edges(cls, species_id: str, edges: Iterable[tuple[str, str]],
                   extra_nodes: Iterable[str] = ()) -> "Graph":
        """Build a graph from undirected edges given as id pairs.

        Self-loops are dropped, duplicate/reversed pairs collapse to one
        edge, and node ids are sorted. `extra_nodes` adds isolated nodes
        (handy for toy graphs; ingest never produces them).
        """
        nodes = set(extra_nodes)
        pairs = set()
        for u, v in edges:
            nodes.add(u)
            nodes.add(v)
            if u == v:
                continue
            pairs.add((u, v) if u < v else (v, u))
        node_ids = sorted(nodes)
        index = {name: i for i, name in enumerate(node_ids)}
        adj: list[list[int]] = [[] for _ in node_ids]
        for u, v in pairs:
            adj[index[u]].append(index[v])
            adj[index[v]].append(index[u])
        for a in adj:
            a.sort()
        return cls(species_id, node_ids, adj, len(pairs))

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def degree(self, i: int) -> int:
        return len(self.adj[i])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adj]

    def has_edge(self, i: int, j: int) -> bool:
        a = self.adj[i]
        k = bisect_left(a, j)
        return k < len(a) and a[k] == j

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each undirected edge once as (i, j) with i < j."""
        for i, nbrs in enumerate(self.adj):
            for j in nbrs:
                if j > i:
                    yield i, j

    def subgraph(self, indices: Iterable[int]) -> "Graph":
        """Induced subgraph; node ids keep their relative (sorted) order."""
        keep = sorted(set(indices))
        remap = {old: new for new, old in enumerate(keep)}
        node_ids = [self.node_ids[i] for i in keep]
        adj = [[remap[j] for j in self.adj[i] if j in remap] for i in keep]
        edge_count = sum(len(a) for a in adj) // 2
        return Graph(self.species_id, node_ids, adj, edge_count)

    def validate(self) -> None:
        """Raise DataError if any structural invariant is violated."""
        if len(set(self.node_ids)) != self.n:
            raise DataError("duplicate node ids")
        total = 0
        for i, nbrs in enumerate(self.adj):
            if sorted(set(nbrs)) != list(nbrs):
                raise DataError(f"adjacency of node {i} not sorted/unique")
            if i in nbrs:
                raise DataError(f"self-loop at node {i}")
            for j in nbrs:
                if not 0 <= j < self.n:
                    raise DataError(f"neighbor index {j} out of range")
                if not self.has_edge(j, i):
                    raise DataError(f"asymmetric edge ({i}, {j})")
            total += len(nbrs)
        if total != 2 * self.edge_count:
            raise DataError("edge_count does not match adjacency")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.species_id == other.species_id
                and self.node_ids == other.node_ids
                and self.adj == other.adj
                and self.edge_count == other.edge_count)

    def __repr__(self) -> str:
        return (f"Graph(species={self.species_id!r}, nodes={self.n}, "
                f"edges={self.edge_count})")
