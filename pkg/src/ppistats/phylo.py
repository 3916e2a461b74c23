"""Rooted phylogenetic trees: Newick parsing, root distances, and the
sibling/cousin relative sets used by feature extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Optional

from .errors import DataError, DomainError, FormatError


class NewickParseError(FormatError):
    pass


@dataclass
class PhyloNode:
    name: Optional[str] = None
    parent: Optional[int] = None
    children: list[int] = field(default_factory=list)
    branch_length: Optional[float] = None


class PhyloTree:
    """Immutable after construction; all queries are pure."""

    def __init__(self, nodes: list[PhyloNode], root: int):
        self.nodes = nodes
        self.root = root
        self.leaf_index: dict[str, int] = {}
        for i, node in enumerate(nodes):
            if not node.children:
                if not node.name:
                    raise NewickParseError(f"leaf node {i} has no name")
                if node.name in self.leaf_index:
                    raise DataError(f"duplicate leaf name {node.name!r}")
                self.leaf_index[node.name] = i
        self._depths: Optional[list[int]] = None
        self._leaves_below: Optional[list[frozenset[str]]] = None

    def is_leaf(self, i: int) -> bool:
        return not self.nodes[i].children

    def leaves(self) -> list[str]:
        return sorted(self.leaf_index)

    def depths(self) -> list[int]:
        """Hop depth of every node (root = 0)."""
        if self._depths is None:
            depths = [0] * len(self.nodes)
            stack = [self.root]
            while stack:
                i = stack.pop()
                for c in self.nodes[i].children:
                    depths[c] = depths[i] + 1
                    stack.append(c)
            self._depths = depths
        return self._depths

    def leaves_below(self) -> list[frozenset[str]]:
        """Leaf-name set of each node's subtree."""
        if self._leaves_below is None:
            sets: list[frozenset[str]] = [frozenset()] * len(self.nodes)
            order: list[int] = []
            stack = [self.root]
            while stack:
                i = stack.pop()
                order.append(i)
                stack.extend(self.nodes[i].children)
            for i in reversed(order):
                node = self.nodes[i]
                if not node.children:
                    sets[i] = frozenset({node.name})
                else:
                    acc: set[str] = set()
                    for c in node.children:
                        acc |= sets[c]
                    sets[i] = frozenset(acc)
            self._leaves_below = sets
        return self._leaves_below

    def leaf(self, species_id: str) -> int:
        try:
            return self.leaf_index[species_id]
        except KeyError:
            raise DataError(f"unknown species {species_id!r} in tree") from None


class _NewickScanner:
    _SPECIALS = "():,;"

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> NewickParseError:
        return NewickParseError(f"newick parse error at offset "
                                f"{self.pos}: {message}")

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def label(self) -> Optional[str]:
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == "'":
            self.pos += 1
            out = []
            while self.pos < len(self.text):
                c = self.text[self.pos]
                if c == "'":
                    if self.text[self.pos:self.pos + 2] == "''":
                        out.append("'")
                        self.pos += 2
                        continue
                    self.pos += 1
                    return "".join(out)
                out.append(c)
                self.pos += 1
            raise self.error("unterminated quoted label")
        start = self.pos
        while (self.pos < len(self.text)
               and self.text[self.pos] not in self._SPECIALS):
            self.pos += 1
        token = self.text[start:self.pos].strip()
        return token or None

    def length(self) -> Optional[float]:
        if self.peek() != ":":
            return None
        self.pos += 1
        self.skip_ws()
        start = self.pos
        while (self.pos < len(self.text)
               and self.text[self.pos] not in self._SPECIALS
               and not self.text[self.pos].isspace()):
            self.pos += 1
        token = self.text[start:self.pos]
        try:
            value = float(token)
        except ValueError:
            raise self.error(f"bad branch length {token!r}") from None
        if value < 0:
            raise self.error(f"negative branch length {token!r}")
        return value


def parse_newick(text: str) -> PhyloTree:
    """Parse one Newick tree; names and branch lengths are preserved."""
    scanner = _NewickScanner(text)
    nodes: list[PhyloNode] = []

    def subtree(parent: Optional[int]) -> int:
        idx = len(nodes)
        nodes.append(PhyloNode(parent=parent))
        if scanner.peek() == "(":
            scanner.take("(")
            nodes[idx].children.append(subtree(idx))
            while scanner.peek() == ",":
                scanner.take(",")
                nodes[idx].children.append(subtree(idx))
            scanner.take(")")
        nodes[idx].name = scanner.label()
        nodes[idx].branch_length = scanner.length()
        return idx

    root = subtree(None)
    scanner.take(";")
    scanner.skip_ws()
    if scanner.pos != len(scanner.text):
        raise scanner.error("trailing content after ';'")
    return PhyloTree(nodes, root)


def load_newick(stream: IO[str]) -> PhyloTree:
    return parse_newick(stream.read())


def _format_label(name: str) -> str:
    if any(c in name for c in "():,; '\t"):
        return "'" + name.replace("'", "''") + "'"
    return name


def to_newick(tree: PhyloTree) -> str:
    """Canonical serialization; parse(to_newick(t)) reproduces t."""
    def render(i: int) -> str:
        node = tree.nodes[i]
        parts = []
        if node.children:
            parts.append("(" + ",".join(render(c) for c in node.children) + ")")
        if node.name is not None:
            parts.append(_format_label(node.name))
        if node.branch_length is not None:
            parts.append(":" + repr(node.branch_length))
        return "".join(parts)

    return render(tree.root) + ";"


def root_distance(tree: PhyloTree, leaf: str, mode: str = "hops") -> float:
    """Distance from the root to a leaf, in hops or summed branch lengths."""
    if mode not in ("hops", "weighted"):
        raise DomainError(f"unknown distance mode {mode!r}")
    i = tree.leaf(leaf)
    total = 0.0
    while tree.nodes[i].parent is not None:
        if mode == "weighted":
            length = tree.nodes[i].branch_length
            if length is None:
                parent = tree.nodes[i].parent
                raise DataError(
                    f"edge {parent}->{i} (toward {leaf!r}) has no branch "
                    f"length; weighted distance unavailable")
            total += length
        else:
            total += 1
        i = tree.nodes[i].parent
    return total


def siblings(tree: PhyloTree, leaf: str, universe: set[str]) -> set[str]:
    """Species sharing the nearest branching ancestor with `leaf`.

    Walks ancestors upward and returns the first nonempty intersection
    of an ancestor's descendant leaves with `universe`, minus the leaf
    itself. Empty result means no qualifying ancestor exists and the
    caller should fall back.
    """
    i = tree.leaf(leaf)
    below = tree.leaves_below()
    node = tree.nodes[i].parent
    while node is not None:
        found = (below[node] & universe) - {leaf}
        if found:
            return set(found)
        node = tree.nodes[node].parent
    return set()


def cousins(tree: PhyloTree, leaf: str, universe: set[str]) -> set[str]:
    """Species in `universe` at the same hop depth as `leaf`.

    When no other species shares the depth, widens to the nearest
    occupied depth (ties resolve to the smaller depth).
    """
    i = tree.leaf(leaf)
    depths = tree.depths()
    target = depths[i]
    by_depth: dict[int, set[str]] = {}
    for other in universe:
        if other == leaf or other not in tree.leaf_index:
            continue
        d = depths[tree.leaf_index[other]]
        by_depth.setdefault(d, set()).add(other)
    if not by_depth:
        return set()
    if target in by_depth:
        return set(by_depth[target])
    best = min(by_depth, key=lambda d: (abs(d - target), d))
    return set(by_depth[best])


def _normalize_name(name: str) -> str:
    return " ".join(name.replace("_", " ").lower().split())


def map_trees(string_names: dict[str, str], hug_tree: PhyloTree,
              lineages: dict[str, list[str]] | None = None,
              ) -> list[tuple[str, str, str]]:
    """Match species to leaves of a second tree by scientific name.

    Returns (species_id, matched_leaf_name, method) rows; method is
    "exact", "lineage" (name collision resolved by lineage overlap
    with ancestor labels), or "unmapped" with an empty leaf name.
    """
    by_norm: dict[str, list[int]] = {}
    for name, idx in hug_tree.leaf_index.items():
        by_norm.setdefault(_normalize_name(name), []).append(idx)

    def ancestor_names(idx: int) -> set[str]:
        names: set[str] = set()
        node = hug_tree.nodes[idx].parent
        while node is not None:
            if hug_tree.nodes[node].name:
                names.add(_normalize_name(hug_tree.nodes[node].name))
            node = hug_tree.nodes[node].parent
        return names

    rows: list[tuple[str, str, str]] = []
    for sid in sorted(string_names):
        candidates = by_norm.get(_normalize_name(string_names[sid]), [])
        if len(candidates) == 1:
            rows.append((sid, hug_tree.nodes[candidates[0]].name, "exact"))
            continue
        if len(candidates) > 1 and lineages and sid in lineages:
            lineage_names = {_normalize_name(x) for x in lineages[sid]}
            scored = sorted(
                ((len(ancestor_names(c) & lineage_names), c)
                 for c in candidates),
                key=lambda t: (-t[0], hug_tree.nodes[t[1]].name))
            if scored[0][0] > 0 and (len(scored) == 1
                                     or scored[0][0] > scored[1][0]):
                rows.append((sid, hug_tree.nodes[scored[0][1]].name,
                             "lineage"))
                continue
        rows.append((sid, "", "unmapped"))
    return rows


def write_mapping_audit(rows: list[tuple[str, str, str]],
                        stream: IO[str]) -> None:
    for sid, hug_name, method in rows:
        stream.write(f"{sid}\t{hug_name}\t{method}\n")
