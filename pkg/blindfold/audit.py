"""Runtime checks of the growing forest against the true tree.

Every forest node carries an anchor (the true-tree node it stands for), so
a forest edge ``(p, c)`` corresponds to the true path between the anchors of
``p`` and ``c``.  :class:`ForestAuditor` verifies after every iteration that

- the forest is a legal subforest (no true edge used twice, no empty edge),
- each forest edge spans at most ``g'`` of true length,
- each ``h`` estimate is within ``ε/16`` of that true length,
- no two trees collide within ``R_col``,
- the fixed subforest grows strictly (perfect mode only),
- the run stays within ``2n`` iterations,

and, before every removal, that the removal targets a real collision.
A failed check raises :class:`AuditViolationError` naming the claim.
"""

from __future__ import annotations

import itertools
import logging

from blindfold.errors import AuditViolationError
from blindfold.forest import ForestState
from blindfold.params import AlgoParams
from blindfold.treekit import EdgeKey, PathIndex, PhyloTree, edge_key

logger = logging.getLogger(__name__)

_FLOAT_SLACK = 1e-9

LEGAL_SUBFOREST = "legal-subforest"
EDGE_LENGTHS = "edge-lengths"
WEIGHT_ESTIMATION = "weight-estimation"
COLLISIONS = "collisions"
PROGRESS = "progress"
ITERATION_BOUND = "iteration-bound"
FALSE_POSITIVE_REMOVAL = "false-positive-removal"


class ForestAuditor:
    """Checks forest claims against *true_tree*; see the module docstring."""

    def __init__(
        self,
        true_tree: PhyloTree,
        params: AlgoParams,
        *,
        check_progress: bool = True,
    ) -> None:
        self.index = PathIndex(true_tree)
        self.tree = true_tree
        self.params = params
        self.check_progress = check_progress
        self.n = len(true_tree.leaves)
        self.fixed_sizes: list[int] = []
        self.removals_checked = 0

    # -- geometry helpers ------------------------------------------------------------

    def _anchor(self, forest: ForestState, node: int) -> int:
        return forest.anchors.get(node, node)

    def edge_path(self, forest: ForestState, parent: int, child: int) -> list[int]:
        return self.index.path(self._anchor(forest, parent), self._anchor(forest, child))

    def cover(self, forest: ForestState, root: int) -> set[int]:
        """True-tree nodes spanned by the tree at *root*."""
        covered = {self._anchor(forest, root)}
        for node in forest.subtree_nodes(root):
            for child in forest.children(node):
                covered.update(self.edge_path(forest, node, child))
        return covered

    def entry_point(self, forest: ForestState, source: int, target: int) -> int:
        """First node of the target tree's cover on the path from *source* to *target*."""
        covered = self.cover(forest, target)
        path = self.index.path(self._anchor(forest, source), self._anchor(forest, target))
        return next(x for x in path if x in covered)

    def fixed_nodes(self, forest: ForestState) -> set[int]:
        """Nodes whose forest subtree is a complete clade of the true tree."""
        fixed: set[int] = set()
        for root in forest.roots:
            for node in reversed(forest.subtree_nodes(root)):
                kids = forest.children(node)
                if not kids:
                    fixed.add(node)
                elif all(
                    c in fixed and len(self.edge_path(forest, node, c)) == 2 for c in kids
                ):
                    fixed.add(node)
        return fixed

    # -- claims ------------------------------------------------------------------------

    def _check_legal(self, forest: ForestState) -> None:
        seen: dict[EdgeKey, tuple[int, int]] = {}
        for parent, child, _ in forest.edges():
            path = self.edge_path(forest, parent, child)
            if len(path) < 2:
                raise AuditViolationError(
                    LEGAL_SUBFOREST, f"Forest edge ({parent}, {child}) maps to an empty path."
                )
            for a, b in zip(path, path[1:]):
                key = edge_key(a, b)
                if key in seen:
                    raise AuditViolationError(
                        LEGAL_SUBFOREST,
                        f"True edge {key} lies under forest edges {seen[key]} "
                        f"and {(parent, child)}.",
                    )
                seen[key] = (parent, child)

    def _check_lengths(self, forest: ForestState) -> None:
        tol = self.params.eps / 16
        for parent, child, h in forest.edges():
            true = self.index.distance(self._anchor(forest, parent), self._anchor(forest, child))
            if true > self.params.g_prime + _FLOAT_SLACK:
                raise AuditViolationError(
                    EDGE_LENGTHS,
                    f"Forest edge ({parent}, {child}) spans {true:.6f} "
                    f"> g'={self.params.g_prime:.6f}.",
                )
            if not abs(h - true) < tol + _FLOAT_SLACK:
                raise AuditViolationError(
                    WEIGHT_ESTIMATION,
                    f"h({parent}, {child})={h:.6f} but the true length is {true:.6f}.",
                )

    def _check_collisions(self, forest: ForestState) -> None:
        roots = forest.roots
        for r1, r2 in itertools.permutations(roots, 2):
            w2 = self.entry_point(forest, r1, r2)
            if w2 == self._anchor(forest, r2):
                continue
            w1 = self.entry_point(forest, r2, r1)
            gap = self.index.distance(w1, w2)
            if gap <= self.params.r_col:
                raise AuditViolationError(
                    COLLISIONS,
                    f"Tree {r1} collides into tree {r2} at distance {gap:.6f} "
                    f"<= R_col={self.params.r_col:.6f}.",
                )

    def _check_progress(self, forest: ForestState) -> None:
        size = len(self.fixed_nodes(forest))
        previous = self.fixed_sizes[-1] if self.fixed_sizes else 0
        self.fixed_sizes.append(size)
        if self.check_progress and size <= previous:
            report = self.bundle_report(forest)
            raise AuditViolationError(
                PROGRESS,
                f"Fixed subforest did not grow ({previous} -> {size}); "
                f"remaining forest has {report['leaves']} leaves, "
                f"fixed bundle present: {report['fixed_bundle']}.",
            )

    # -- entry points --------------------------------------------------------------------

    def start(self, forest: ForestState) -> None:
        self.fixed_sizes = [len(self.fixed_nodes(forest))]

    def check_iteration(self, forest: ForestState, iteration: int) -> None:
        if iteration + 1 > 2 * self.n:
            raise AuditViolationError(
                ITERATION_BOUND, f"Iteration {iteration + 1} exceeds 2n={2 * self.n}."
            )
        self._check_legal(forest)
        self._check_lengths(forest)
        self._check_collisions(forest)
        self._check_progress(forest)
        logger.debug("audit ok at iteration %d (fixed=%d)", iteration, self.fixed_sizes[-1])

    def check_removal(self, forest: ForestState, u0: int, u1: int, v: int) -> None:
        """The tree at *u0* must enter the tree at *u1* at or below the edge above *v*."""
        self.removals_checked += 1
        entry = self.entry_point(forest, u0, u1)
        parent = forest.parent(v)
        below: set[int] = set()
        for node in forest.subtree_nodes(v):
            for child in forest.children(node):
                below.update(self.edge_path(forest, node, child))
        below.update(self.edge_path(forest, parent, v))  # type: ignore[arg-type]
        below.discard(self._anchor(forest, parent))  # type: ignore[arg-type]
        if entry == self._anchor(forest, u1) or entry not in below:
            raise AuditViolationError(
                FALSE_POSITIVE_REMOVAL,
                f"Removal at {v} (parent {parent}) but tree {u0} enters tree {u1} at {entry}.",
            )

    # -- diagnostics -----------------------------------------------------------------------

    def remaining_forest(self, forest: ForestState) -> dict[int, set[int]]:
        """Adjacency of the true tree minus every edge the forest covers."""
        used: set[EdgeKey] = set()
        for parent, child, _ in forest.edges():
            path = self.edge_path(forest, parent, child)
            used.update(edge_key(a, b) for a, b in zip(path, path[1:]))
        adjacency: dict[int, set[int]] = {}
        for a, b, _ in self.tree.edges():
            if (a, b) in used:
                continue
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)
        return adjacency

    def bundle_report(self, forest: ForestState) -> dict:
        """Leaves of the remaining forest and whether four fixed roots form a bundle."""
        adjacency = self.remaining_forest(forest)
        leaves = sorted(x for x, nbrs in adjacency.items() if len(nbrs) == 1)
        fixed = self.fixed_nodes(forest)
        fixed_roots = {self._anchor(forest, r) for r in forest.roots if r in fixed}
        candidates = [x for x in leaves if x in fixed_roots]

        def hops(x: int, y: int) -> int:
            return len(self.index.path(x, y)) - 1

        found = False
        for a, b in itertools.combinations(candidates, 2):
            if next(iter(adjacency[a])) != next(iter(adjacency[b])):
                continue
            close = [
                c for c in candidates
                if c not in (a, b) and hops(a, c) <= 5 and hops(b, c) <= 5
            ]
            if any(hops(c, d) <= 5 for c, d in itertools.combinations(close, 2)):
                found = True
                break
        return {"leaves": len(leaves), "fixed_roots": len(candidates), "fixed_bundle": found}
