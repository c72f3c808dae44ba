"""Hand-built trees for tests and demonstrations.

Leaves are labelled ``1..n`` and internal nodes numbered from ``n + 1`` in
creation order, matching :func:`blindfold.evolve.random_delta_bm_tree`.
"""

from __future__ import annotations

from decimal import Decimal

from blindfold.treekit import PhyloTree, as_length, unroot

Edge = tuple[int, int, Decimal]


class _Builder:
    """Collects edges while handing out leaf labels and internal ids."""

    def __init__(self, n_leaves: int) -> None:
        self.edges: list[Edge] = []
        self._next_leaf = 1
        self._next_internal = n_leaves + 1

    def leaf(self) -> int:
        label = self._next_leaf
        self._next_leaf += 1
        return label

    def internal(self) -> int:
        node = self._next_internal
        self._next_internal += 1
        return node

    def join(self, a: int, b: int, length: Decimal) -> None:
        self.edges.append((a, b, length))

    def hang_balanced(self, top: int, depth: int, length: Decimal) -> None:
        """Complete binary subtree of *depth* levels below *top*."""
        frontier = [top]
        for level in range(1, depth + 1):
            nxt = []
            for node in frontier:
                for _ in range(2):
                    child = self.leaf() if level == depth else self.internal()
                    self.join(node, child, length)
                    nxt.append(child)
            frontier = nxt


def balanced_tree(depth: int, length: Decimal | str | float, *, rooted: bool = True) -> PhyloTree:
    """Complete binary tree with ``2**depth`` leaves and uniform edge length.

    The root is the first internal id.  With ``rooted=False`` its two edges
    merge into one.
    """
    step = as_length(length)
    builder = _Builder(1 << depth)
    root = builder.internal()
    builder.hang_balanced(root, depth, step)
    tree = PhyloTree.from_edges(builder.edges, root=root)
    return tree if rooted else unroot(tree)


def single_edge_tree(d: Decimal | str | float) -> PhyloTree:
    return PhyloTree.from_edges([(1, 2, as_length(d))])


def caterpillar_tree(n: int, length: Decimal | str | float) -> PhyloTree:
    """Unrooted caterpillar: leaves ``1..n`` hang off a spine in order."""
    step = as_length(length)
    builder = _Builder(n)
    first, second = builder.leaf(), builder.leaf()
    spine = builder.internal()
    builder.join(spine, first, step)
    builder.join(spine, second, step)
    for _ in range(n - 3):
        nxt = builder.internal()
        builder.join(spine, nxt, step)
        builder.join(nxt, builder.leaf(), step)
        spine = nxt
    builder.join(spine, builder.leaf(), step)
    return PhyloTree.from_edges(builder.edges)


def fake_cherry_tree(g: Decimal | str | float = "0.12") -> PhyloTree:
    """A tree on which leaves 1 and 2 look like a cherry early on but are not.

    Leaves 1 and 2 sit at distance ``2g`` through two internal nodes.  The
    half-length edges around node 2 lead into a large balanced side (32
    leaves), the other branch into a small balanced side (8 leaves), so the
    pair passes the local cherry test before either side is built and is
    later caught as a collision.
    """
    full = as_length(g)
    half = full / 2
    builder = _Builder(42)
    u, v = builder.leaf(), builder.leaf()
    hub = builder.internal()
    x = builder.internal()
    s = builder.internal()
    builder.join(hub, u, full)
    builder.join(hub, x, half)
    builder.join(x, v, half)
    builder.join(x, s, half)
    for _ in range(2):
        side = builder.internal()
        builder.join(s, side, half)
        builder.hang_balanced(side, 4, full)
    p = builder.internal()
    builder.join(hub, p, full)
    builder.hang_balanced(p, 3, full)
    return PhyloTree.from_edges(builder.edges)
