"""The 19 whole-graph network statistics and their CSV serialization.

All operations are pure functions of an immutable Graph. The only
sampled quantity is the effective diameter on graphs above the exact
threshold; it is deterministic given the configured seed.
"""

from __future__ import annotations

import logging
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, fields
from typing import IO, Iterable, Optional

import numpy as np

from .errors import DomainError, FormatError
from .graph import Graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StatConfig:
    """Knobs for the statistics kernels."""

    seed: int = 0
    exact_threshold: int = 2000
    num_sources: int = 256
    effective_quantile: float = 0.9


@dataclass(frozen=True)
class StatVector:
    """The 19 network statistics of one species.

    Field order matches the statistics-table output columns. An
    undefined assortativity is None and serializes as an empty field.
    """

    nodes: int
    edges: int
    average_degree: float
    maximum_degree: int
    density: float
    num_components: int
    max_component_fraction: float
    full_diameter: int
    effective_diameter: float
    global_clustering: float
    clustering_coefficient: float
    star_density_2: float
    star_density_3: float
    gini_degree: float
    edge_entropy: float
    assortative_mixing: Optional[float]
    kcore_max_k: int
    kcore_nodes: int
    kcore_edges: int

    def as_list(self) -> list:
        return [getattr(self, f) for f in STAT_FIELDS]


STAT_FIELDS = tuple(f.name for f in fields(StatVector))

INT_FIELDS = frozenset({"nodes", "edges", "maximum_degree", "num_components",
                        "full_diameter", "kcore_max_k", "kcore_nodes",
                        "kcore_edges"})

STATS_CSV_HEADER = "species_id," + ",".join(STAT_FIELDS)


def _bfs_distances(adj: list[list[int]], src: int) -> list[int]:
    """Hop distances from src; -1 for unreachable nodes."""
    dist = [-1] * len(adj)
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        du = dist[u]
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = du + 1
                queue.append(v)
    return dist


def connected_components(g: Graph) -> tuple[int, float, Graph]:
    """Count components and extract the largest one.

    Ties on size keep the component containing the smallest node index.
    """
    if g.n == 0:
        raise DomainError("empty graph")
    comp = [-1] * g.n
    members: list[list[int]] = []
    for start in range(g.n):
        if comp[start] >= 0:
            continue
        cid = len(members)
        comp[start] = cid
        group = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.adj[u]:
                if comp[v] < 0:
                    comp[v] = cid
                    group.append(v)
                    queue.append(v)
        members.append(group)
    # components are discovered in order of their smallest node index,
    # so max() on size alone implements the tie-break
    largest = max(members, key=len)
    fraction = len(largest) / g.n
    return len(members), fraction, g.subgraph(largest)


def full_diameter(g: Graph) -> int:
    """Exact diameter of the largest connected component."""
    _, _, comp = connected_components(g)
    best = 0
    for src in range(comp.n):
        best = max(best, max(_bfs_distances(comp.adj, src)))
    return best


def _interpolated_quantile(sorted_values: list[int], q: float) -> float:
    m = len(sorted_values)
    if m == 0:
        return 0.0
    if m == 1:
        return float(sorted_values[0])
    h = (m - 1) * q
    lo = math.floor(h)
    if lo >= m - 1:
        return float(sorted_values[-1])
    frac = h - lo
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo])


def effective_diameter(g: Graph, quantile: float = 0.9,
                       cfg: StatConfig | None = None) -> float:
    """Interpolated distance quantile within the largest component.

    Exact (all unordered pairs) up to cfg.exact_threshold nodes;
    estimated from seeded BFS sources above it.
    """
    if cfg is None:
        cfg = StatConfig()
    if not 0 < quantile < 1:
        raise DomainError("quantile must lie strictly between 0 and 1")
    _, _, comp = connected_components(g)
    if comp.n <= 1:
        return 0.0
    if g.n <= cfg.exact_threshold or cfg.num_sources >= comp.n:
        distances = []
        for src in range(comp.n):
            d = _bfs_distances(comp.adj, src)
            distances.extend(d[src + 1:])
    else:
        rng = random.Random(cfg.seed)
        sources = sorted(rng.sample(range(comp.n), cfg.num_sources))
        distances = []
        for src in sources:
            d = _bfs_distances(comp.adj, src)
            d[src] = 0
            distances.extend(x for x in d if x > 0)
    distances.sort()
    return _interpolated_quantile(distances, quantile)


def _triangle_counts(g: Graph) -> list[int]:
    """Number of triangles through each node."""
    counts = [0] * g.n
    nbr_sets = [set(a) for a in g.adj]
    for u, v in g.edges():
        small, large = (u, v) if len(g.adj[u]) <= len(g.adj[v]) else (v, u)
        for w in g.adj[small]:
            if w > v and w in nbr_sets[large]:
                counts[u] += 1
                counts[v] += 1
                counts[w] += 1
    return counts


def global_clustering(g: Graph) -> float:
    """Closed triads over all connected triples (transitivity)."""
    if g.n == 0:
        raise DomainError("empty graph")
    triples = sum(d * (d - 1) // 2 for d in g.degrees())
    if triples == 0:
        return 0.0
    triangles = sum(_triangle_counts(g)) // 3
    return 3 * triangles / triples


def mean_local_clustering(g: Graph) -> float:
    """Mean local clustering coefficient; degree < 2 contributes 0."""
    if g.n == 0:
        raise DomainError("empty graph")
    tri = _triangle_counts(g)
    total = 0.0
    for i, d in enumerate(g.degrees()):
        if d >= 2:
            total += tri[i] / (d * (d - 1) / 2)
    return total / g.n


def star_density(g: Graph, k: int) -> float:
    """Present k-stars over the maximum possible: sum C(d,k) / n*C(n-1,k)."""
    if k not in (2, 3):
        raise DomainError("star density defined for k in {2, 3}")
    if g.n <= k:
        logger.warning("star_density_%d on %d-node graph: returning 0",
                       k, g.n)
        return 0.0
    present = sum(math.comb(d, k) for d in g.degrees())
    possible = g.n * math.comb(g.n - 1, k)
    return present / possible


def degree_gini(degrees: Iterable[int]) -> float:
    """Gini coefficient of the degree multiset (population double sum)."""
    d = sorted(degrees)
    n = len(d)
    if n == 0:
        raise DomainError("empty degree distribution")
    total = sum(d)
    if total == 0:
        return 0.0
    # sum_i sum_j |d_i - d_j| = 2 * sum_i (2i - n + 1) * d_(i), ascending
    abs_sum = 2 * sum((2 * i - n + 1) * x for i, x in enumerate(d))
    mu = total / n
    return abs_sum / (2 * n * n * mu)


def degree_entropy(degrees: Iterable[int]) -> float:
    """Shannon entropy (bits) of the empirical degree histogram."""
    counts = Counter(degrees)
    n = sum(counts.values())
    if n == 0:
        raise DomainError("empty degree distribution")
    h = 0.0
    for c in counts.values():
        p = c / n
        h -= p * math.log2(p)
    return h


def assortativity(g: Graph) -> Optional[float]:
    """Pearson correlation of endpoint degrees over the symmetrized
    edge list; None when the endpoint degrees have zero variance.
    """
    if g.edge_count == 0:
        raise DomainError("assortativity needs at least one edge")
    deg = g.degrees()
    xs = []
    ys = []
    for i, j in g.edges():
        xs.extend((deg[i], deg[j]))
        ys.extend((deg[j], deg[i]))
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    xm = x - x.mean()
    ym = y - y.mean()
    var = float(xm @ xm)
    if var == 0.0:
        return None
    return float((xm @ ym) / var)


def core_numbers(g: Graph) -> list[int]:
    """Per-node core numbers by min-degree bucket peeling."""
    n = g.n
    degree = g.degrees()
    maxdeg = max(degree) if degree else 0
    buckets: list[list[int]] = [[] for _ in range(maxdeg + 1)]
    for v, d in enumerate(degree):
        buckets[d].append(v)
    core = [0] * n
    removed = [False] * n
    cur = 0
    peeled = 0
    while peeled < n:
        if not buckets[cur]:
            cur += 1
            continue
        v = buckets[cur].pop()
        # stale entry: v was re-bucketed at a lower degree or removed
        if removed[v] or degree[v] != cur:
            continue
        removed[v] = True
        core[v] = cur
        peeled += 1
        for u in g.adj[v]:
            if not removed[u] and degree[u] > cur:
                degree[u] -= 1
                buckets[degree[u]].append(u)
    return core


def max_kcore(g: Graph) -> tuple[int, int, int]:
    """Degeneracy k plus node and edge counts of the full k-core."""
    if g.n == 0:
        raise DomainError("empty graph")
    core = core_numbers(g)
    k = max(core)
    keep = [v for v, c in enumerate(core) if c >= k]
    sub = g.subgraph(keep)
    return k, sub.n, sub.edge_count


def compute_stats(g: Graph, cfg: StatConfig | None = None) -> StatVector:
    """All 19 statistics of one graph."""
    if cfg is None:
        cfg = StatConfig()
    if g.n == 0:
        raise DomainError("empty graph")
    degrees = g.degrees()
    n = g.n
    m = g.edge_count
    num_comp, max_frac, largest = connected_components(g)
    diam = 0
    for src in range(largest.n):
        diam = max(diam, max(_bfs_distances(largest.adj, src)))
    k, core_n, core_m = max_kcore(g)
    return StatVector(
        nodes=n,
        edges=m,
        average_degree=2 * m / n,
        maximum_degree=max(degrees),
        density=(2 * m / (n * (n - 1))) if n >= 2 else 0.0,
        num_components=num_comp,
        max_component_fraction=max_frac,
        full_diameter=diam,
        effective_diameter=effective_diameter(g, cfg.effective_quantile, cfg),
        global_clustering=global_clustering(g),
        clustering_coefficient=mean_local_clustering(g),
        star_density_2=star_density(g, 2),
        star_density_3=star_density(g, 3),
        gini_degree=degree_gini(degrees),
        edge_entropy=degree_entropy(degrees),
        assortative_mixing=assortativity(g) if m >= 1 else None,
        kcore_max_k=k,
        kcore_nodes=core_n,
        kcore_edges=core_m,
    )


def format_stat(name: str, value) -> str:
    """One CSV cell: ints verbatim, reals at 10 significant digits,
    None (undefined) as an empty field."""
    if value is None:
        return ""
    if name in INT_FIELDS:
        return str(int(value))
    return format(float(value), ".10g")


def write_stats_csv(rows: Iterable[tuple[str, StatVector]],
                    stream: IO[str]) -> None:
    stream.write(STATS_CSV_HEADER + "\n")
    for species_id, sv in rows:
        cells = [species_id]
        cells.extend(format_stat(f, getattr(sv, f)) for f in STAT_FIELDS)
        stream.write(",".join(cells) + "\n")


def read_stats_csv(stream: Iterable[str]) -> dict[str, StatVector]:
    """Inverse of write_stats_csv."""
    lines = iter(stream)
    try:
        header = next(lines).strip()
    except StopIteration:
        raise FormatError("empty statistics file") from None
    if header != STATS_CSV_HEADER:
        raise FormatError(f"bad statistics header: {header!r}")
    out: dict[str, StatVector] = {}
    for lineno, raw in enumerate(lines, start=2):
        line = raw.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(STAT_FIELDS) + 1:
            raise FormatError(f"line {lineno}: wrong column count")
        values = {}
        for name, cell in zip(STAT_FIELDS, cells[1:]):
            if cell == "":
                if name != "assortative_mixing":
                    raise FormatError(
                        f"line {lineno}: empty value for {name}")
                values[name] = None
            elif name in INT_FIELDS:
                values[name] = int(cell)
            else:
                values[name] = float(cell)
        out[cells[0]] = StatVector(**values)
    return out
