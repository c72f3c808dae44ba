"""The growing rooted subforest of the reconstruction loop.

Leaves keep their labels as ids; every cherry root gets a fresh id above
the largest label and ids are never reused, so caches keyed by node id stay
valid for as long as the node survives.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Iterable, Iterator, Mapping

from blindfold.errors import (
    DuplicateNodeError,
    ForestStructureError,
    MissingEntryError,
    NotARootError,
    UnknownNodeError,
)
from blindfold.treekit import PhyloTree

logger = logging.getLogger(__name__)


class ForestState:
    """Rooted binary forest with estimated edge lengths ``h``.

    ``anchors`` optionally maps each forest node to the true-tree node it
    stands for; it is filled only when a true tree is available (perfect
    mode and audits).
    """

    __slots__ = ("_parent", "_children", "_h", "_next_id", "leaves", "anchors", "iteration")

    def __init__(self, leaves: Iterable[int], *, first_internal: int | None = None) -> None:
        labels = tuple(sorted(leaves))
        if len(set(labels)) != len(labels):
            raise DuplicateNodeError(f"Leaf labels repeat: {labels}.")
        self.leaves = frozenset(labels)
        self._parent: dict[int, int | None] = {leaf: None for leaf in labels}
        self._children: dict[int, tuple[int, int]] = {}
        self._h: dict[tuple[int, int], float] = {}
        start = max(labels, default=0) + 1
        self._next_id = start if first_internal is None else max(first_internal, start)
        self.anchors: dict[int, int] = {}
        self.iteration = 0

    def copy(self) -> ForestState:
        other = ForestState.__new__(ForestState)
        other.leaves = self.leaves
        other._parent = dict(self._parent)
        other._children = dict(self._children)
        other._h = dict(self._h)
        other._next_id = self._next_id
        other.anchors = dict(self.anchors)
        other.iteration = self.iteration
        return other

    # -- queries -------------------------------------------------------------------

    def __contains__(self, node: object) -> bool:
        return node in self._parent

    def __len__(self) -> int:
        return len(self._parent)

    def require(self, *nodes: int) -> None:
        for node in nodes:
            if node not in self._parent:
                raise UnknownNodeError(f"Node {node!r} is not in the forest.")

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self._parent))

    @property
    def roots(self) -> tuple[int, ...]:
        return tuple(sorted(n for n, p in self._parent.items() if p is None))

    def is_root(self, node: int) -> bool:
        self.require(node)
        return self._parent[node] is None

    def is_leaf(self, node: int) -> bool:
        self.require(node)
        return node not in self._children

    def parent(self, node: int) -> int | None:
        self.require(node)
        return self._parent[node]

    def children(self, node: int) -> tuple[int, ...]:
        self.require(node)
        return self._children.get(node, ())

    def child_pair(self, node: int) -> tuple[int, int]:
        """The two children, or ``(node, node)`` for a leaf."""
        return self._children.get(node, (node, node))

    def sister(self, node: int) -> int:
        up = self.parent(node)
        if up is None:
            raise ForestStructureError(f"Root {node} has no sister.")
        a, b = self._children[up]
        return b if a == node else a

    def root_of(self, node: int) -> int:
        self.require(node)
        while (up := self._parent[node]) is not None:
            node = up
        return node

    def ancestors(self, node: int) -> list[int]:
        """Proper ancestors, nearest first."""
        self.require(node)
        out = []
        while (node := self._parent[node]) is not None:  # type: ignore[assignment]
            out.append(node)
        return out

    def h(self, parent: int, child: int) -> float:
        """Estimated length of the edge ``parent -> child``; 0 when they coincide."""
        if parent == child:
            return 0.0
        try:
            return self._h[(parent, child)]
        except KeyError:
            raise MissingEntryError(f"No edge length for ({parent}, {child}).") from None

    def subtree_nodes(self, node: int) -> list[int]:
        """Nodes of the subtree at *node* in BFS order, *node* first."""
        self.require(node)
        order = [node]
        queue = deque([node])
        while queue:
            for child in self._children.get(queue.popleft(), ()):
                order.append(child)
                queue.append(child)
        return order

    def subtree_leaves(self, node: int) -> list[int]:
        return sorted(x for x in self.subtree_nodes(node) if x not in self._children)

    def h_path(self, x: int, y: int) -> float:
        """Sum of ``h`` along the path between two nodes of the same tree."""
        up_x = [x, *self.ancestors(x)]
        up_y = [y, *self.ancestors(y)]
        common = set(up_x) & set(up_y)
        if not common:
            raise ForestStructureError(f"Nodes {x} and {y} lie in different trees.")
        total = 0.0
        for chain in (up_x, up_y):
            for child, parent in zip(chain, chain[1:]):
                if child in common:
                    break
                total += self._h[(parent, child)]
        return total

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for (parent, child), length in sorted(self._h.items()):
            yield parent, child, length

    @property
    def h_values(self) -> Mapping[tuple[int, int], float]:
        return self._h

    # -- mutation ------------------------------------------------------------------

    def add_cherry(
        self,
        v1: int,
        w1: int,
        l_v: float,
        l_w: float,
        *,
        anchor: int | None = None,
    ) -> int:
        """Join roots *v1* and *w1* under a fresh node and return its id."""
        if v1 == w1:
            raise DuplicateNodeError(f"Cannot join root {v1} with itself.")
        for node in (v1, w1):
            if not self.is_root(node):
                raise NotARootError(f"Node {node} is not a root.")
        u1 = self._next_id
        self._next_id += 1
        self._parent[u1] = None
        self._parent[v1] = u1
        self._parent[w1] = u1
        self._children[u1] = (v1, w1) if v1 < w1 else (w1, v1)
        self._h[(u1, v1)] = l_v
        self._h[(u1, w1)] = l_w
        if anchor is not None:
            self.anchors[u1] = anchor
        logger.debug("cherry %d = (%d: %.6g, %d: %.6g)", u1, v1, l_v, w1, l_w)
        return u1

    def remove_collision(self, v: int) -> list[int]:
        """Delete every proper ancestor of *v* with its downward edges.

        *v*, and each sibling subtree detached on the way up, becomes a
        root.  Returns the removed nodes, nearest first; nothing happens
        when *v* is absent or already a root.
        """
        if v not in self._parent or self._parent[v] is None:
            return []
        removed = self.ancestors(v)
        for node in removed:
            for child in self._children.pop(node):
                if self._parent.get(child) == node:
                    self._parent[child] = None
                self._h.pop((node, child), None)
            del self._parent[node]
            self.anchors.pop(node, None)
        logger.debug("removed %s above %d", removed, v)
        return removed

    # -- export --------------------------------------------------------------------

    def to_phylo_tree(self, root: int, *, min_length: float = 1e-9) -> PhyloTree:
        """The tree at *root* as a rooted :class:`PhyloTree` with ``h`` lengths.

        Estimates below *min_length* are raised to it.
        """
        nodes = self.subtree_nodes(root)
        edges = [
            (p, c, max(self._h[(p, c)], min_length))
            for p in nodes
            for c in self._children.get(p, ())
        ]
        return PhyloTree.from_edges(edges, root=root, nodes=nodes)
