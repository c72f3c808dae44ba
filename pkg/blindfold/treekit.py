"""Tree values, Newick I/O, path metrics, restrictions and tree comparison.

A :class:`PhyloTree` is an immutable weighted tree over integer node ids.
Leaves carry their label as their id (``1..n``); internal nodes get fresh
ids above the largest label.  Edge lengths are exact :class:`~decimal.Decimal`
values so that Δ-grid arithmetic is bit-exact; estimators convert to float.

Usage::

    from blindfold.treekit import newick_parse, newick_write, path_distance

    tree = newick_parse("((1:0.1,2:0.1):0.05,3:0.1,4:0.1);")
    path_distance(tree, 1, 3)          # Decimal('0.25')
    newick_write(tree)                 # canonical form, children by smallest leaf
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from blindfold.errors import (
    DuplicateNodeError,
    EmptyNodeSetError,
    InvalidTreeError,
    LeafSetMismatchError,
    MissingBranchLengthError,
    NewickSyntaxError,
    NonBinaryTreeError,
    UnknownNodeError,
)

EdgeKey = tuple[int, int]

_NAME_PATTERN = re.compile(r"[^\s(),:;\[\]]+")
_WHITESPACE = re.compile(r"\s*")


def edge_key(u: int, v: int) -> EdgeKey:
    """Order-independent key for the edge ``{u, v}``."""
    return (u, v) if u < v else (v, u)


def as_length(value: Decimal | str | int | float) -> Decimal:
    """Convert *value* to an exact decimal length."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


# -- tree value ----------------------------------------------------------------

@dataclass(frozen=True)
class PhyloTree:
    """Immutable weighted tree with optional root designation.

    Parameters
    ----------
    adjacency:
        Node id -> sorted tuple of neighbour ids.
    lengths:
        :func:`edge_key` -> strictly positive decimal length.
    root:
        Root node for the rooted form, or ``None`` for an unrooted tree.
    """

    adjacency: Mapping[int, tuple[int, ...]]
    lengths: Mapping[EdgeKey, Decimal]
    root: int | None = None

    def __post_init__(self) -> None:
        _validate_structure(self)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[int, int, Decimal | str | int | float]],
        *,
        root: int | None = None,
        nodes: Iterable[int] = (),
    ) -> PhyloTree:
        """Build a tree from ``(u, v, length)`` triples.

        *nodes* lists extra isolated ids (only meaningful for one-node trees).
        """
        neighbours: dict[int, set[int]] = {n: set() for n in nodes}
        lengths: dict[EdgeKey, Decimal] = {}
        for u, v, length in edges:
            key = edge_key(u, v)
            if key in lengths:
                raise InvalidTreeError(f"Edge {key} listed twice.")
            lengths[key] = as_length(length)
            neighbours.setdefault(u, set()).add(v)
            neighbours.setdefault(v, set()).add(u)
        adjacency = {n: tuple(sorted(nbrs)) for n, nbrs in neighbours.items()}
        return cls(adjacency=adjacency, lengths=lengths, root=root)

    # -- basic queries ---------------------------------------------------------

    @cached_property
    def nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.adjacency))

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        """Nodes of degree at most one, in label order."""
        return tuple(n for n in self.nodes if len(self.adjacency[n]) <= 1)

    @cached_property
    def internal_nodes(self) -> tuple[int, ...]:
        leaves = set(self.leaves)
        return tuple(n for n in self.nodes if n not in leaves)

    @property
    def is_rooted(self) -> bool:
        return self.root is not None

    def __contains__(self, node: object) -> bool:
        return node in self.adjacency

    def require(self, *nodes: int) -> None:
        """Raise :class:`UnknownNodeError` unless every node is in the tree."""
        for node in nodes:
            if node not in self.adjacency:
                raise UnknownNodeError(f"Unknown node id: {node!r}")

    def neighbors(self, node: int) -> tuple[int, ...]:
        self.require(node)
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        return len(self.neighbors(node))

    def length(self, u: int, v: int) -> Decimal:
        try:
            return self.lengths[edge_key(u, v)]
        except KeyError:
            raise UnknownNodeError(f"No edge between {u} and {v}.") from None

    def edges(self) -> Iterator[tuple[int, int, Decimal]]:
        for (u, v), length in sorted(self.lengths.items()):
            yield u, v, length

    # -- rooted view -----------------------------------------------------------

    @cached_property
    def parents(self) -> dict[int, int | None]:
        """Parent map of the rooted form."""
        if self.root is None:
            raise InvalidTreeError("Tree is unrooted; reroot it first.")
        parents: dict[int, int | None] = {self.root: None}
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            for nbr in self.adjacency[node]:
                if nbr not in parents:
                    parents[nbr] = node
                    queue.append(nbr)
        return parents

    @cached_property
    def _min_label(self) -> dict[int, int]:
        """Smallest descendant leaf label per node of the rooted form."""
        parents = self.parents
        best: dict[int, int] = {}
        for node in reversed(_bfs_order(self, self.root)):
            kids = [c for c in self.adjacency[node] if c != parents[node]]
            best[node] = min((best[c] for c in kids), default=node)
        return best

    def children(self, node: int) -> tuple[int, ...]:
        """Children in canonical order (smallest descendant leaf label first)."""
        self.require(node)
        parent = self.parents[node]
        kids = [c for c in self.adjacency[node] if c != parent]
        return tuple(sorted(kids, key=self._min_label.__getitem__))

    def descendant_leaves(self, node: int) -> tuple[int, ...]:
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            kids = self.children(cur)
            if not kids:
                out.append(cur)
            stack.extend(kids)
        return tuple(sorted(out))

    def depth(self) -> int:
        """Number of edges on the longest root-to-leaf path."""
        depths = {self.root: 0}
        for node in _bfs_order(self, self.root):
            for child in self.children(node):
                depths[child] = depths[node] + 1
        return max(depths.values())

    def path(self, u: int, v: int) -> list[int]:
        """Nodes on the unique u–v path, endpoints included."""
        self.require(u, v)
        prev: dict[int, int | None] = {u: None}
        queue = deque([u])
        while queue:
            node = queue.popleft()
            if node == v:
                break
            for nbr in self.adjacency[node]:
                if nbr not in prev:
                    prev[nbr] = node
                    queue.append(nbr)
        out = [v]
        while out[-1] != u:
            out.append(prev[out[-1]])  # type: ignore[arg-type]
        out.reverse()
        return out


def _bfs_order(tree: PhyloTree, start: int) -> list[int]:
    order = [start]
    seen = {start}
    i = 0
    while i < len(order):
        for nbr in tree.adjacency[order[i]]:
            if nbr not in seen:
                seen.add(nbr)
                order.append(nbr)
        i += 1
    return order


def _validate_structure(tree: PhyloTree) -> None:
    adjacency = tree.adjacency
    if not adjacency:
        raise InvalidTreeError("Tree has no nodes.")
    edge_count = 0
    for node, nbrs in adjacency.items():
        for nbr in nbrs:
            if nbr == node or node not in adjacency.get(nbr, ()):
                raise InvalidTreeError(f"Adjacency is not symmetric at {node}-{nbr}.")
            if node < nbr:
                edge_count += 1
                length = tree.lengths.get((node, nbr))
                if length is None:
                    raise InvalidTreeError(f"Edge ({node}, {nbr}) has no length.")
                if not length > 0:
                    raise InvalidTreeError(
                        f"Edge ({node}, {nbr}) has non-positive length {length}."
                    )
    if edge_count != len(tree.lengths) or edge_count != len(adjacency) - 1:
        raise InvalidTreeError("Edge set does not form a tree.")
    start = next(iter(adjacency))
    if len(_bfs_order(tree, start)) != len(adjacency):
        raise InvalidTreeError("Tree is not connected.")
    if tree.root is not None and tree.root not in adjacency:
        raise UnknownNodeError(f"Root {tree.root!r} is not a node.")


def check_binary(tree: PhyloTree) -> None:
    """Raise :class:`NonBinaryTreeError` unless *tree* is binary.

    Rooted form: root of degree 2, other internal nodes of degree 3.
    Unrooted form: internal nodes of degree 3.
    """
    for node in tree.internal_nodes:
        deg = len(tree.adjacency[node])
        want = 2 if node == tree.root else 3
        if deg != want:
            raise NonBinaryTreeError(f"Node {node} has degree {deg}, expected {want}.")


def check_leaf_labels(tree: PhyloTree) -> None:
    """Raise unless the leaves are exactly ``1..n``."""
    n = len(tree.leaves)
    if set(tree.leaves) != set(range(1, n + 1)):
        raise LeafSetMismatchError(f"Leaf labels {list(tree.leaves)} do not cover 1..{n}.")


# -- derived trees ---------------------------------------------------------------

def reroot(tree: PhyloTree, node: int) -> PhyloTree:
    """Same tree with the root designation moved to *node*."""
    tree.require(node)
    return PhyloTree(adjacency=tree.adjacency, lengths=tree.lengths, root=node)


def unroot(tree: PhyloTree) -> PhyloTree:
    """Drop the root, suppressing it when it has degree two."""
    if tree.root is None:
        return tree
    root = tree.root
    nbrs = tree.adjacency[root]
    if len(nbrs) != 2:
        return PhyloTree(adjacency=tree.adjacency, lengths=tree.lengths, root=None)
    a, b = nbrs
    edges = [(u, v, length) for u, v, length in tree.edges() if root not in (u, v)]
    edges.append((a, b, tree.length(root, a) + tree.length(root, b)))
    return PhyloTree.from_edges(edges)


def scale_lengths(tree: PhyloTree, factor: Decimal | str | int) -> PhyloTree:
    factor = as_length(factor)
    lengths = {key: length * factor for key, length in tree.lengths.items()}
    return PhyloTree(adjacency=tree.adjacency, lengths=lengths, root=tree.root)


# -- Newick ----------------------------------------------------------------------

class _ParsedNode:
    __slots__ = ("name", "length", "offset", "children")

    def __init__(self, offset: int) -> None:
        self.name: str | None = None
        self.length: Decimal | None = None
        self.offset = offset
        self.children: list[_ParsedNode] = []


class _NewickReader:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        self.pos = _WHITESPACE.match(self.text, self.pos).end()  # type: ignore[union-attr]

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        got = self.peek()
        if got != char:
            what = repr(got) if got else "end of input"
            raise NewickSyntaxError(f"Expected {char!r}, found {what}", self.pos)
        self.pos += 1

    def subtree(self) -> _ParsedNode:
        node = _ParsedNode(self.pos)
        if self.peek() == "(":
            self.pos += 1
            node.children.append(self.subtree())
            while self.peek() == ",":
                self.pos += 1
                node.children.append(self.subtree())
            self.expect(")")
        self.skip_ws()
        match = _NAME_PATTERN.match(self.text, self.pos)
        if match:
            node.name = match.group()
            self.pos = match.end()
        if self.peek() == ":":
            self.pos += 1
            self.skip_ws()
            start = self.pos
            match = _NAME_PATTERN.match(self.text, self.pos)
            if not match:
                raise NewickSyntaxError("Expected a branch length", self.pos)
            try:
                node.length = Decimal(match.group())
            except InvalidOperation:
                raise NewickSyntaxError(
                    f"Malformed branch length {match.group()!r}", start
                ) from None
            if not node.length.is_finite():
                raise NewickSyntaxError(f"Non-finite branch length {match.group()!r}", start)
            self.pos = match.end()
        elif not node.children and node.name is None:
            what = repr(self.peek()) if self.peek() else "end of input"
            raise NewickSyntaxError(f"Expected a leaf name, found {what}", self.pos)
        return node


def newick_parse(text: str, *, permissive: bool = False) -> PhyloTree:
    """Parse a semicolon-terminated Newick string.

    Leaf names must be decimal integers and become node ids.  A top level
    with two children gives the rooted form, three children the unrooted
    form; ``(b:d)a;`` encodes the unrooted two-leaf tree.  Non-binary nodes
    are rejected unless *permissive* is set.
    """
    reader = _NewickReader(text)
    top = reader.subtree()
    reader.expect(";")
    if reader.peek():
        raise NewickSyntaxError("Trailing characters after ';'", reader.pos)

    labels: list[int] = []
    for node in _walk(top):
        if node.children:
            continue
        labels.append(_leaf_label(node))
    if len(set(labels)) != len(labels):
        raise DuplicateNodeError(f"Duplicate leaf labels in {sorted(labels)}.")

    top_is_leaf = len(top.children) == 1 and top.name is not None
    if top_is_leaf:
        labels.append(_leaf_label(top))
        if len(set(labels)) != len(labels):
            raise DuplicateNodeError(f"Duplicate leaf labels in {sorted(labels)}.")

    next_id = itertools.count(max(labels, default=0) + 1)
    edges: list[tuple[int, int, Decimal]] = []

    def build(node: _ParsedNode) -> int:
        node_id = _leaf_label(node) if not node.children else next(next_id)
        for child in node.children:
            if child.length is None:
                raise MissingBranchLengthError(
                    f"Missing branch length for node at offset {child.offset}."
                )
            if child.length <= 0:
                raise InvalidTreeError(
                    f"Branch length {child.length} at offset {child.offset} is not positive."
                )
            if not permissive and child.children and len(child.children) != 2:
                raise NonBinaryTreeError(
                    f"Node at offset {child.offset} has {len(child.children)} children."
                )
            edges.append((node_id, build(child), child.length))
        return node_id

    if top_is_leaf:
        top_id = _leaf_label(top)
        child = top.children[0]
        if child.length is None:
            raise MissingBranchLengthError(
                f"Missing branch length for node at offset {child.offset}."
            )
        if child.children:
            raise NonBinaryTreeError("A named top-level node may only hold a single leaf.")
        edges.append((top_id, build(child), child.length))
        return PhyloTree.from_edges(edges)

    if not top.children:
        return PhyloTree.from_edges([], nodes=[_leaf_label(top)])
    if not permissive and len(top.children) not in (2, 3):
        raise NonBinaryTreeError(f"Top-level node has {len(top.children)} children.")
    top_id = build(top)
    root = top_id if len(top.children) == 2 else None
    tree = PhyloTree.from_edges(edges, root=root)
    if not permissive:
        check_binary(tree)
    return tree


def _walk(node: _ParsedNode) -> Iterator[_ParsedNode]:
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(cur.children)


def _leaf_label(node: _ParsedNode) -> int:
    if node.name is None or not node.name.isdigit():
        raise NewickSyntaxError(
            f"Leaf name must be a decimal integer, got {node.name!r}", node.offset
        )
    return int(node.name)


def _format_length(length: Decimal) -> str:
    return format(length.normalize(), "f")


def newick_write(tree: PhyloTree) -> str:
    """Canonical Newick text for *tree*.

    Children are ordered by their smallest descendant leaf label.  Unrooted
    trees are written around the internal node next to the smallest leaf.
    """
    if len(tree.nodes) == 1:
        return f"{tree.nodes[0]};"
    if tree.root is not None:
        text, _ = _render(tree, tree.root, None)
        if tree.degree(tree.root) == 1:
            text += str(tree.root)
        return text + ";"
    first = min(tree.leaves)
    if len(tree.nodes) == 2:
        (other,) = tree.adjacency[first]
        return f"({other}:{_format_length(tree.length(first, other))}){first};"
    base = tree.adjacency[first][0]
    text, _ = _render(tree, base, None)
    return text + ";"


def _render(tree: PhyloTree, node: int, parent: int | None) -> tuple[str, int]:
    kids = [c for c in tree.adjacency[node] if c != parent]
    if not kids:
        return str(node), node
    parts = []
    for child in kids:
        text, smallest = _render(tree, child, node)
        parts.append((smallest, f"{text}:{_format_length(tree.length(node, child))}"))
    parts.sort()
    return "(" + ",".join(p for _, p in parts) + ")", parts[0][0]


def isomorphic(t1: PhyloTree, t2: PhyloTree) -> bool:
    """Same labelled shape and lengths (internal ids may differ)."""
    return newick_write(t1) == newick_write(t2)


# -- path metric -----------------------------------------------------------------

def path_distance(tree: PhyloTree, u: int, v: int) -> Decimal:
    """Sum of edge lengths on the u–v path."""
    nodes = tree.path(u, v)
    return sum((tree.length(a, b) for a, b in zip(nodes, nodes[1:])), Decimal(0))


def spanning_edges(tree: PhyloTree, node_set: Iterable[int]) -> frozenset[EdgeKey]:
    """Edges lying on a path between two members of *node_set*."""
    members = set(node_set)
    tree.require(*members)
    if len(members) < 2:
        return frozenset()
    anchor = min(members)
    order = _bfs_order(tree, anchor)
    parent: dict[int, int | None] = {anchor: None}
    for node in order:
        for nbr in tree.adjacency[node]:
            if nbr not in parent:
                parent[nbr] = node
    below = {node: (1 if node in members else 0) for node in order}
    for node in reversed(order):
        up = parent[node]
        if up is not None:
            below[up] += below[node]
    return frozenset(
        edge_key(node, parent[node])  # type: ignore[arg-type]
        for node in order
        if parent[node] is not None and below[node] > 0
    )


def restrict(tree: PhyloTree, node_set: Iterable[int]) -> PhyloTree:
    """Restricted subtree on *node_set*.

    Keeps nodes and edges on paths between members, then contracts every
    degree-2 path through non-members, summing the contracted lengths.
    """
    members = set(node_set)
    if not members:
        raise EmptyNodeSetError("Cannot restrict to an empty node set.")
    tree.require(*members)
    kept = spanning_edges(tree, members)
    if not kept:
        return PhyloTree.from_edges([], nodes=members)
    neighbours: dict[int, set[int]] = {}
    lengths: dict[EdgeKey, Decimal] = {}
    for u, v in kept:
        neighbours.setdefault(u, set()).add(v)
        neighbours.setdefault(v, set()).add(u)
        lengths[(u, v)] = tree.lengths[(u, v)]
    for node in sorted(neighbours):
        if node in members or len(neighbours[node]) != 2:
            continue
        a, b = neighbours.pop(node)
        merged = lengths.pop(edge_key(a, node)) + lengths.pop(edge_key(b, node))
        neighbours[a].discard(node)
        neighbours[b].discard(node)
        neighbours[a].add(b)
        neighbours[b].add(a)
        lengths[edge_key(a, b)] = merged
    root = tree.root if tree.root in members else None
    adjacency = {n: tuple(sorted(nbrs)) for n, nbrs in neighbours.items()}
    return PhyloTree(adjacency=adjacency, lengths=lengths, root=root)


def are_edge_disjoint(tree: PhyloTree, t1: Iterable[int], t2: Iterable[int]) -> bool:
    """True iff no edge lies on both a *t1*-internal and a *t2*-internal path."""
    return not (spanning_edges(tree, t1) & spanning_edges(tree, t2))


# -- quartets --------------------------------------------------------------------

@dataclass(frozen=True)
class QuartetSplit:
    """A pairing ``a b | c d`` of four nodes, stored canonically."""

    first: tuple[int, int]
    second: tuple[int, int]

    @classmethod
    def of(cls, a: int, b: int, c: int, d: int) -> QuartetSplit:
        p = tuple(sorted((a, b)))
        q = tuple(sorted((c, d)))
        if q < p:
            p, q = q, p
        return cls(first=p, second=q)  # type: ignore[arg-type]

    def pairs_together(self, x: int, y: int) -> bool:
        return tuple(sorted((x, y))) in (self.first, self.second)

    def __str__(self) -> str:
        return f"{self.first[0]}{self.first[1]}|{self.second[0]}{self.second[1]}"


def true_quartet_split(tree: PhyloTree, q: Iterable[int]) -> QuartetSplit | None:
    """Split realised by ``restrict(tree, q)``; ``None`` when degenerate."""
    quartet = list(q)
    if len(quartet) != 4 or len(set(quartet)) != 4:
        raise DuplicateNodeError(f"Quartet needs four distinct nodes, got {quartet}.")
    tree.require(*quartet)
    d = {(x, y): path_distance(tree, x, y) for x in quartet for y in quartet}
    for x, a, b in itertools.permutations(quartet, 3):
        if d[(a, x)] + d[(x, b)] == d[(a, b)]:
            return None
    a, b, c, e = quartet
    sums = [
        (d[(a, b)] + d[(c, e)], (a, b, c, e)),
        (d[(a, c)] + d[(b, e)], (a, c, b, e)),
        (d[(a, e)] + d[(b, c)], (a, e, b, c)),
    ]
    sums.sort(key=lambda item: item[0])
    if sums[0][0] == sums[1][0]:
        return None
    return QuartetSplit.of(*sums[0][1])


# -- tree comparison ---------------------------------------------------------------

@dataclass(frozen=True)
class Bipartition:
    """Leaf bipartition; ``side_a`` holds the smallest label."""

    side_a: frozenset[int]
    side_b: frozenset[int]

    @classmethod
    def of(cls, side: Iterable[int], labels: Iterable[int]) -> Bipartition:
        one = frozenset(side)
        other = frozenset(labels) - one
        if not one or not other:
            raise InvalidTreeError("Both sides of a bipartition must be nonempty.")
        if min(other) < min(one):
            one, other = other, one
        return cls(side_a=one, side_b=other)

    @property
    def trivial(self) -> bool:
        return len(self.side_a) < 2 or len(self.side_b) < 2


def bipartitions(tree: PhyloTree) -> frozenset[Bipartition]:
    """Nontrivial bipartitions of the unrooted form of *tree*."""
    tree = unroot(tree)
    labels = frozenset(tree.leaves)
    if len(labels) < 4:
        return frozenset()
    start = min(labels)
    order = _bfs_order(tree, start)
    parent: dict[int, int | None] = {start: None}
    for node in order:
        for nbr in tree.adjacency[node]:
            if nbr not in parent:
                parent[nbr] = node
    below: dict[int, frozenset[int]] = {}
    for node in reversed(order):
        kids = [c for c in tree.adjacency[node] if c != parent[node]]
        if not kids:
            below[node] = frozenset((node,))
        else:
            below[node] = frozenset().union(*(below[c] for c in kids))
    out = set()
    for node in order[1:]:
        split = Bipartition.of(below[node], labels)
        if not split.trivial:
            out.add(split)
    return frozenset(out)


def rf_distance(t1: PhyloTree, t2: PhyloTree) -> int:
    """Robinson–Foulds distance over nontrivial bipartitions."""
    if set(t1.leaves) != set(t2.leaves):
        raise LeafSetMismatchError(
            f"Leaf sets differ: {sorted(t1.leaves)} vs {sorted(t2.leaves)}."
        )
    return len(bipartitions(t1) ^ bipartitions(t2))


# -- fast path queries -------------------------------------------------------------

class PathIndex:
    """Precomputed path metric of a fixed tree.

    Holds float all-pairs distances (summed exactly, converted once), parent
    pointers from an arbitrary root, and helpers for medians and path edges.
    """

    __slots__ = ("tree", "_parent", "_depth", "_dist")

    def __init__(self, tree: PhyloTree) -> None:
        self.tree = tree
        origin = tree.root if tree.root is not None else tree.nodes[0]
        order = _bfs_order(tree, origin)
        self._parent: dict[int, int | None] = {origin: None}
        self._depth: dict[int, int] = {origin: 0}
        for node in order:
            for nbr in tree.adjacency[node]:
                if nbr not in self._parent:
                    self._parent[nbr] = node
                    self._depth[nbr] = self._depth[node] + 1
        self._dist: dict[int, dict[int, float]] = {}
        for source in tree.nodes:
            exact = {source: Decimal(0)}
            for node in _bfs_order(tree, source):
                for nbr in tree.adjacency[node]:
                    if nbr not in exact:
                        exact[nbr] = exact[node] + tree.length(node, nbr)
            self._dist[source] = {node: float(value) for node, value in exact.items()}

    def distance(self, u: int, v: int) -> float:
        try:
            return self._dist[u][v]
        except KeyError:
            raise UnknownNodeError(f"Unknown node id in ({u!r}, {v!r}).") from None

    def lca(self, u: int, v: int) -> int:
        depth, parent = self._depth, self._parent
        while depth[u] > depth[v]:
            u = parent[u]  # type: ignore[assignment]
        while depth[v] > depth[u]:
            v = parent[v]  # type: ignore[assignment]
        while u != v:
            u, v = parent[u], parent[v]  # type: ignore[assignment]
        return u

    def median(self, a: int, b: int, c: int) -> int:
        """The unique node lying on all three paths between a, b and c."""
        return max((self.lca(a, b), self.lca(a, c), self.lca(b, c)),
                   key=self._depth.__getitem__)

    def path(self, u: int, v: int) -> list[int]:
        top = self.lca(u, v)
        left = [u]
        while left[-1] != top:
            left.append(self._parent[left[-1]])  # type: ignore[arg-type]
        right = [v]
        while right[-1] != top:
            right.append(self._parent[right[-1]])  # type: ignore[arg-type]
        return left + right[-2::-1]

    def path_edges(self, u: int, v: int) -> list[EdgeKey]:
        nodes = self.path(u, v)
        return [edge_key(a, b) for a, b in zip(nodes, nodes[1:])]

    def on_path(self, x: int, u: int, v: int) -> bool:
        return abs(self.distance(u, x) + self.distance(x, v) - self.distance(u, v)) < 1e-9
