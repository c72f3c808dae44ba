"""The cherry-picking reconstruction loop.

Each iteration grows the forest by locally certified cherries, refreshes
the working metric, then scans every ordered pair of roots twice for
collisions and removes the offending ancestors.  The loop ends when at
most three roots remain; they are joined into the final unrooted tree.

Usage::

    from blindfold.bcp import MetricMode, RunOptions, bcp_run

    result = bcp_run(chars, params)
    result.tree                      # unrooted PhyloTree, h lengths
    for record in result.trace:
        print(record.to_json())
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

from blindfold.ancestral import TieStream
from blindfold.audit import ForestAuditor
from blindfold.distances import (
    INF,
    DistanceTable,
    NodeMetric,
    SequenceMetric,
    TreeMetric,
    distorted_metric,
    is_short,
    round_to_delta,
)
from blindfold.errors import (
    AlphabetMismatchError,
    InvalidRegimeError,
    LeafSetMismatchError,
    NonConvergenceError,
)
from blindfold.evolve import CharacterMatrix, ModelSpec
from blindfold.forest import ForestState
from blindfold.params import AlgoParams
from blindfold.quartets import is_collision, is_split
from blindfold.treekit import EdgeKey, PathIndex, PhyloTree, unroot

logger = logging.getLogger(__name__)

_TINY_LENGTH = 1e-9


class MetricMode(enum.Enum):
    STATISTICAL = "statistical"
    PERFECT = "perfect"


@dataclass(frozen=True)
class RunOptions:
    """Switches for one run.

    Parameters
    ----------
    mode:
        Where raw node distances come from.
    audit:
        Check the forest against the true tree after every iteration.
    delta_rounding:
        Round working-metric entries and new edge lengths to the Δ-grid.
    tie_seed:
        Seed of the tie-breaking streams used by reconstruction.
    max_iterations:
        Iteration cap; defaults to ``2n``.
    workers:
        Threads used to evaluate cherry candidates.
    """

    mode: MetricMode = MetricMode.STATISTICAL
    audit: bool = False
    delta_rounding: bool = True
    tie_seed: int = 0
    max_iterations: int | None = None
    workers: int = 1


# -- trace -----------------------------------------------------------------------

@dataclass(frozen=True)
class CherryCandidate:
    v1: int
    w1: int
    accepted: bool
    l_v: float = 0.0
    l_w: float = 0.0
    z_v: int | None = None
    z_w: int | None = None
    reason: str = ""


@dataclass(frozen=True)
class AddedCherry:
    node: int
    v1: int
    w1: int
    l_v: float
    l_w: float

    def to_dict(self) -> dict:
        return {"node": self.node, "v1": self.v1, "w1": self.w1, "l_v": self.l_v, "l_w": self.l_w}


@dataclass(frozen=True)
class Removal:
    u0: int
    u1: int
    v: int
    removed: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"u0": self.u0, "u1": self.u1, "v": self.v, "removed": list(self.removed)}


@dataclass(frozen=True)
class PhaseRecord:
    """One phase of one iteration: ``cherries``, ``collisions``, ``second-pass`` or ``join``."""

    iteration: int
    phase: str
    roots: int
    cherries: tuple[AddedCherry, ...] = ()
    removals: tuple[Removal, ...] = ()

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "roots": self.roots,
            "cherries": [c.to_dict() for c in self.cherries],
            "removals": [r.to_dict() for r in self.removals],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class BCPResult:
    tree: PhyloTree
    iterations: int
    trace: list[PhaseRecord] = field(default_factory=list)
    forest: ForestState | None = None

    def trace_lines(self) -> str:
        return "".join(record.to_json() + "\n" for record in self.trace)

    def added_cherries(self) -> list[AddedCherry]:
        return [c for record in self.trace for c in record.cherries]

    def removals(self) -> list[Removal]:
        return [r for record in self.trace for r in record.removals]


# -- the three routines --------------------------------------------------------------

def add_cherry(
    forest: ForestState,
    v1: int,
    w1: int,
    l_v: float,
    l_w: float,
    *,
    anchor: int | None = None,
) -> int:
    return forest.add_cherry(v1, w1, l_v, l_w, anchor=anchor)


def _nearest(v: int, roots: Sequence[int], exclude: tuple[int, int], table: DistanceTable) -> int:
    others = [r for r in roots if r not in exclude]
    return min(others, key=lambda r: (table[v, r], r))


def local_cherry(
    v1: int,
    w1: int,
    forest: ForestState,
    table: DistanceTable,
    metric: NodeMetric,
    params: AlgoParams,
    *,
    roots: Sequence[int] | None = None,
    delta: Decimal | None = None,
) -> CherryCandidate:
    """Decide whether roots *v1*, *w1* form a cherry of the remaining forest.

    Three tests in turn: the pair is close, every nearby pair of other
    roots splits away from it, and both new edges are short.  With
    *delta* the edge lengths are rounded to the grid.
    """
    roots = forest.roots if roots is None else roots
    g, eps = params.g, params.eps
    if not table[v1, w1] <= 2 * g + eps:
        return CherryCandidate(v1, w1, False, reason="short-distance")

    reach = 5 * g + eps
    near = [
        r for r in roots
        if r not in (v1, w1) and table[v1, r] <= reach and table[w1, r] <= reach
    ]
    witnesses = [(a, b) for a, b in itertools.combinations(near, 2) if table[a, b] <= reach]
    if not witnesses:
        return CherryCandidate(v1, w1, False, reason="no-witness")
    for pair in witnesses:
        if not is_split((v1, w1), pair, table, params.f):
            return CherryCandidate(v1, w1, False, reason=f"split {pair[0]},{pair[1]}")

    lengths = []
    refs = []
    for a, b in ((v1, w1), (w1, v1)):
        z0 = _nearest(a, roots, (v1, w1), table)
        ok, length = is_short(
            forest.child_pair(a), (b, z0), forest, metric, params.r_acc, g, eps / 16,
            delta=delta,
        )
        if not ok:
            return CherryCandidate(v1, w1, False, reason=f"long-edge {a}")
        lengths.append(length)
        refs.append(z0)
    return CherryCandidate(
        v1, w1, True, l_v=lengths[0], l_w=lengths[1], z_v=refs[0], z_w=refs[1]
    )


def detect_collision(
    u0: int,
    u1: int,
    forest: ForestState,
    table: DistanceTable,
    params: AlgoParams,
) -> tuple[bool, int | None]:
    """Scan the tree at *u1* bottom-up for an edge the tree at *u0* runs into.

    The test must fire from both children of *u0*.  Returns the lower end
    of the first such edge.
    """
    x0, y0 = forest.child_pair(u0)
    order = forest.subtree_nodes(u1)[1:]
    for v in reversed(order):
        u = forest.parent(v)
        w = forest.sister(v)
        h_uv = forest.h(u, v)  # type: ignore[arg-type]
        if not is_collision(x0, v, w, u, h_uv, forest, table, params.f):  # type: ignore[arg-type]
            continue
        if is_collision(y0, v, w, u, h_uv, forest, table, params.f):  # type: ignore[arg-type]
            return True, v
    return False, None


def remove_collision(v: int, forest: ForestState) -> list[int]:
    return forest.remove_collision(v)


# -- main loop -------------------------------------------------------------------------

class _Run:
    """State of one ``bcp_run`` call; owned by a single thread."""

    def __init__(
        self,
        leaves: Sequence[int],
        params: AlgoParams,
        metric: NodeMetric,
        options: RunOptions,
        index: PathIndex | None,
        auditor: ForestAuditor | None,
    ) -> None:
        self.params = params
        self.metric = metric
        self.options = options
        self.index = index
        self.auditor = auditor
        self.delta = params.delta if options.delta_rounding else None
        self.forest = ForestState(leaves)
        if index is not None:
            self.forest.anchors.update({leaf: leaf for leaf in leaves})
        self.estimates: dict[EdgeKey, float] = {}
        self.cross: dict[EdgeKey, float] = {}
        self.trace: list[PhaseRecord] = []
        self.iteration = 0

    # -- metric --------------------------------------------------------------------

    def build_table(self) -> DistanceTable:
        """Working metric of the current forest, filled on demand.

        Same-tree pairs get ``h``-path sums, cross-tree pairs the rounded
        distorted metric; both are taken from a snapshot so the table stays
        fixed while collisions are removed.
        """
        view = self.forest.copy()
        params = self.params

        def fill(x: int, y: int) -> float:
            if view.root_of(x) == view.root_of(y):
                return view.h_path(x, y)
            key = (x, y) if x < y else (y, x)
            value = self.cross.get(key)
            if value is None:
                value = distorted_metric(
                    key[0], key[1], view, self.metric, params.r_acc, params.eps,
                    memo=self.estimates, delta=self.delta,
                )
                if self.delta is not None:
                    value = round_to_delta(value, self.delta)
                self.cross[key] = value
            return value

        return DistanceTable(fill=fill)

    # -- phases --------------------------------------------------------------------

    def cherry_phase(self, table: DistanceTable) -> list[AddedCherry]:
        roots = self.forest.roots
        bound = 2 * self.params.g + self.params.eps
        pairs = [(a, b) for a, b in itertools.combinations(roots, 2) if table[a, b] <= bound]

        def evaluate(pair: tuple[int, int]) -> CherryCandidate:
            return local_cherry(
                pair[0], pair[1], self.forest, table, self.metric, self.params,
                roots=roots, delta=self.delta,
            )

        if self.options.workers > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=self.options.workers) as pool:
                verdicts = list(pool.map(evaluate, pairs))
        else:
            verdicts = [evaluate(pair) for pair in pairs]

        used: set[int] = set()
        added = []
        for cand in verdicts:
            if not cand.accepted or cand.v1 in used or cand.w1 in used:
                continue
            used.update((cand.v1, cand.w1))
            anchor = None
            if self.index is not None:
                anchors = self.forest.anchors
                ref = anchors[cand.z_v]  # type: ignore[index]
                anchor = self.index.median(anchors[cand.v1], anchors[cand.w1], ref)
            node = self.forest.add_cherry(cand.v1, cand.w1, cand.l_v, cand.l_w, anchor=anchor)
            added.append(AddedCherry(node, cand.v1, cand.w1, cand.l_v, cand.l_w))
        return added

    def collision_pass(self, table: DistanceTable) -> list[Removal]:
        view = self.forest.copy()
        roots = view.roots
        removals = []
        for u0, u1 in itertools.permutations(roots, 2):
            if view.is_leaf(u1):
                continue
            hit, v = detect_collision(u0, u1, view, table, self.params)
            if not hit:
                continue
            if self.auditor is not None:
                self.auditor.check_removal(view, u0, u1, v)  # type: ignore[arg-type]
            removed = self.forest.remove_collision(v)  # type: ignore[arg-type]
            if removed:
                removals.append(Removal(u0, u1, v, tuple(removed)))  # type: ignore[arg-type]
                self.evict(removed)
                logger.debug("collision of %d into %d at %d: removed %s", u0, u1, v, removed)
        return removals

    def evict(self, nodes: Sequence[int]) -> None:
        """Forget cached distances of nodes that left the forest; ids are never reused."""
        gone = set(nodes)
        for cache in (self.estimates, self.cross):
            for key in [k for k in cache if k[0] in gone or k[1] in gone]:
                del cache[key]
        if isinstance(self.metric, SequenceMetric):
            self.metric.forget(gone)

    def record(self, phase: str, **items: tuple) -> None:
        self.trace.append(
            PhaseRecord(self.iteration, phase, len(self.forest.roots), **items)
        )

    # -- driver --------------------------------------------------------------------

    def run(self) -> BCPResult:
        n = len(self.forest.leaves)
        cap = self.options.max_iterations or 2 * n
        table = self.build_table()
        if self.auditor is not None:
            self.auditor.start(self.forest)
        while len(self.forest.roots) > 3:
            if self.iteration >= cap:
                raise NonConvergenceError(
                    f"No tree after {cap} iterations; {len(self.forest.roots)} roots remain."
                )
            added = self.cherry_phase(table)
            self.record("cherries", cherries=tuple(added))
            table = self.build_table()
            first = self.collision_pass(table)
            self.record("collisions", removals=tuple(first))
            second = self.collision_pass(table)
            self.record("second-pass", removals=tuple(second))
            logger.info(
                "iteration %d: %d cherries, %d removals, %d roots",
                self.iteration, len(added), len(first) + len(second), len(self.forest.roots),
            )
            if not (added or first or second):
                raise NonConvergenceError(
                    f"Iteration {self.iteration} added no cherry and removed nothing "
                    f"({len(self.forest.roots)} roots); check the parameter regime."
                )
            if self.auditor is not None:
                self.auditor.check_iteration(self.forest, self.iteration)
            self.iteration += 1
        tree = self.join(table)
        self.record("join")
        return BCPResult(tree=tree, iterations=self.iteration, trace=self.trace, forest=self.forest)

    def join(self, table: DistanceTable) -> PhyloTree:
        """Connect the last roots: a star for three, an edge for two."""
        forest = self.forest
        roots = forest.roots
        edges: list[tuple[int, int, float]] = [
            (p, c, _positive(h)) for p, c, h in forest.edges()
        ]
        if len(roots) == 2:
            a, b = roots
            edges.append((a, b, _positive(table[a, b])))
        elif len(roots) == 3:
            a, b, c = roots
            center = max(forest.nodes) + 1
            for x, y, z in ((a, b, c), (b, a, c), (c, a, b)):
                length = 0.5 * (table[x, y] + table[x, z] - table[y, z])
                edges.append((center, x, _positive(length)))
        if not edges:
            return PhyloTree.from_edges([], nodes=roots)
        tree = PhyloTree.from_edges(edges, root=roots[0] if len(roots) == 1 else None)
        return unroot(tree)


def _positive(value: float) -> float:
    if math.isnan(value) or value == INF or value <= 0:
        return _TINY_LENGTH
    return value


def bcp_run(
    chars: CharacterMatrix | None,
    params: AlgoParams,
    options: RunOptions = RunOptions(),
    *,
    true_tree: PhyloTree | None = None,
    auditor: ForestAuditor | None = None,
) -> BCPResult:
    """Reconstruct the unrooted topology behind *chars*.

    Perfect mode needs *true_tree* and reads its path metric instead of
    sequences.  With ``options.audit`` (or an explicit *auditor*) every
    iteration is checked against *true_tree*.
    """
    perfect = options.mode is MetricMode.PERFECT
    if (perfect or options.audit or auditor is not None) and true_tree is None:
        raise InvalidRegimeError("Perfect mode and audits need the true tree.")
    if chars is None and not perfect:
        raise InvalidRegimeError("Statistical mode needs a character matrix.")
    if chars is not None and chars.model is not ModelSpec.CFN:
        raise AlphabetMismatchError("Reconstruction reads ±1 data; reduce JC input first.")

    if chars is not None:
        leaves = tuple(sorted(chars.labels))
    else:
        leaves = tuple(sorted(true_tree.leaves))  # type: ignore[union-attr]
    if true_tree is not None and set(true_tree.leaves) != set(leaves):
        raise LeafSetMismatchError("Character labels differ from the true tree's leaves.")

    index = PathIndex(true_tree) if true_tree is not None else None
    metric: NodeMetric
    if perfect:
        metric = TreeMetric(index)  # type: ignore[arg-type]
    else:
        ties = TieStream(options.tie_seed)
        metric = SequenceMetric(chars, params.majority, ties)  # type: ignore[arg-type]

    if auditor is None and options.audit:
        auditor = ForestAuditor(true_tree, params, check_progress=perfect)  # type: ignore[arg-type]

    logger.info("bcp run: n=%d mode=%s k=%s", len(leaves), options.mode.value,
                chars.k if chars is not None else "-")
    return _Run(leaves, params, metric, options, index, auditor).run()
