"""Distance estimation between forest nodes.

The estimators here are generic over a :class:`NodeMetric`, the source of
raw node-to-node distances:

- :class:`SequenceMetric` compares reconstructed sequences (statistical mode);
- :class:`TreeMetric` reads true path distances between anchors (perfect mode);
- :class:`AnalyticMetric` substitutes exact expected correlations.

Distances are floats; ``math.inf`` is the "too far to tell" sentinel and
propagates through every combination below.
"""

from __future__ import annotations

import itertools
import logging
import math
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Mapping, Protocol

import numpy as np

from blindfold.ancestral import (
    MajorityConfig,
    TieSource,
    anc_estimate,
    exact_reconstruction_correlation,
)
from blindfold.errors import MissingEntryError, SequenceLengthMismatchError, UnknownNodeError
from blindfold.evolve import CharacterMatrix
from blindfold.forest import ForestState
from blindfold.treekit import EdgeKey, PathIndex, PhyloTree, edge_key

logger = logging.getLogger(__name__)

INF = math.inf


# -- estimators on sequences -----------------------------------------------------

def dist_from_correlation(correlation: float) -> float:
    """``-½ ln c`` for ``c > 0``, else ``+inf``."""
    if correlation <= 0.0:
        return INF
    return -0.5 * math.log(correlation)


def dist_hat(a: np.ndarray, b: np.ndarray) -> float:
    """Distance from the empirical correlation of two ±1 sequences."""
    if a.shape != b.shape:
        raise SequenceLengthMismatchError(f"Sequences of length {a.shape} and {b.shape}.")
    corr = float(np.dot(a.astype(np.int64), b.astype(np.int64))) / a.shape[0]
    return dist_from_correlation(corr)


def int_from_distances(d_v1v2: float, d_w1w2: float, d_v1w1: float, d_v2w2: float) -> float:
    """Four-point internal length of the pairing ``v1 w1 | v2 w2``."""
    if INF in (d_v1v2, d_w1w2, d_v1w1, d_v2w2):
        return INF
    return 0.5 * (d_v1v2 + d_w1w2 - d_v1w1 - d_v2w2)


def int_hat(sv1: np.ndarray, sw1: np.ndarray, sv2: np.ndarray, sw2: np.ndarray) -> float:
    return int_from_distances(
        dist_hat(sv1, sv2), dist_hat(sw1, sw2), dist_hat(sv1, sw1), dist_hat(sv2, sw2)
    )


def expected_correlation(c_x: float, c_y: float, d: float) -> float:
    """``E[σ̂_x σ̂_y]`` for dangling nodes at distance *d* with channel correlations ``c``."""
    return c_x * c_y * math.exp(-2.0 * d)


def round_to_delta(value: float, delta: Decimal | float) -> float:
    """Nearest multiple of *delta*, halves rounding up; ``inf`` passes through."""
    if value == INF:
        return INF
    step = Decimal(repr(delta)) if isinstance(delta, float) else Decimal(delta)
    units = (Decimal(repr(value)) / step).to_integral_value(rounding=ROUND_HALF_UP)
    return float(units * step)


# -- node metrics ------------------------------------------------------------------

class NodeMetric(Protocol):
    def distance(self, forest: ForestState, x: int, y: int) -> float: ...


class SequenceMetric:
    """``dist_hat`` between recursive-majority reconstructions.

    Reconstructions and pair distances are cached by node id; a surviving
    node's subtree never changes, so the caches stay valid across
    iterations.  Concurrent fills of the same key compute the same value.
    """

    __slots__ = ("chars", "config", "ties", "_sequences", "_pairs")

    def __init__(self, chars: CharacterMatrix, config: MajorityConfig, ties: TieSource) -> None:
        self.chars = chars
        self.config = config
        self.ties = ties
        self._sequences: dict[int, np.ndarray] = {}
        self._pairs: dict[EdgeKey, float] = {}

    def sequence(self, forest: ForestState, node: int) -> np.ndarray:
        seq = self._sequences.get(node)
        if seq is None:
            forest.require(node)
            if forest.is_leaf(node):
                seq = self.chars.sequence(node)
            else:
                seq = anc_estimate(forest, self.chars, self.config, self.ties, root=node)
            self._sequences[node] = seq
        return seq

    def distance(self, forest: ForestState, x: int, y: int) -> float:
        if x == y:
            return 0.0
        key = edge_key(x, y)
        value = self._pairs.get(key)
        if value is None:
            value = dist_hat(self.sequence(forest, x), self.sequence(forest, y))
            self._pairs[key] = value
        return value

    def forget(self, nodes: Iterable[int]) -> None:
        """Drop the reconstructions and pair distances of removed nodes."""
        gone = set(nodes)
        for node in gone:
            self._sequences.pop(node, None)
        for key in [k for k in self._pairs if k[0] in gone or k[1] in gone]:
            del self._pairs[key]

    @property
    def cached_nodes(self) -> int:
        return len(self._sequences)

    @property
    def cached_pairs(self) -> int:
        return len(self._pairs)


class TreeMetric:
    """True path distance between the anchors of two forest nodes."""

    __slots__ = ("index",)

    def __init__(self, index: PathIndex) -> None:
        self.index = index

    def distance(self, forest: ForestState, x: int, y: int) -> float:
        try:
            return self.index.distance(forest.anchors.get(x, x), forest.anchors.get(y, y))
        except UnknownNodeError:
            raise UnknownNodeError(f"No anchor for forest node {x} or {y}.") from None


class AnalyticMetric:
    """Exact-expectation distances through reconstruction channels.

    ``distance(x, y) = -½ ln(c_x c_y e^{-2 d(x, y)})`` where ``c_x`` is the
    exact correlation between the true state at *x* and its estimate.
    Only valid for dangling pairs of small subtrees.
    """

    __slots__ = ("index", "config", "_channels")

    def __init__(self, index: PathIndex, config: MajorityConfig) -> None:
        self.index = index
        self.config = config
        self._channels: dict[int, float] = {}

    def channel(self, forest: ForestState, node: int) -> float:
        value = self._channels.get(node)
        if value is None:
            if forest.is_leaf(node):
                value = 1.0
            else:
                subtree = self._true_subtree(forest, node)
                value = exact_reconstruction_correlation(subtree, self.config)
            self._channels[node] = value
        return value

    def _true_subtree(self, forest: ForestState, node: int) -> PhyloTree:
        anchor = forest.anchors
        nodes = forest.subtree_nodes(node)
        edges = [
            (p, c, self.index.distance(anchor[p], anchor.get(c, c)))
            for p in nodes
            for c in forest.children(p)
        ]
        return PhyloTree.from_edges(edges, root=node)

    def distance(self, forest: ForestState, x: int, y: int) -> float:
        if x == y:
            return 0.0
        d = self.index.distance(forest.anchors.get(x, x), forest.anchors.get(y, y))
        corr = expected_correlation(self.channel(forest, x), self.channel(forest, y), d)
        return dist_from_correlation(corr)


# -- forest estimators --------------------------------------------------------------

def _cut(forest: ForestState, metric: NodeMetric, nodes: tuple[int, ...], r_acc: float) -> bool:
    """True when some pair among *nodes* is farther apart than *r_acc*."""
    return any(
        metric.distance(forest, a, b) > r_acc
        for a, b in itertools.combinations(nodes, 2)
        if a != b
    )


def _internal(forest: ForestState, metric: NodeMetric, v1: int, w1: int, v2: int, w2: int) -> float:
    return int_from_distances(
        metric.distance(forest, v1, v2),
        metric.distance(forest, w1, w2),
        metric.distance(forest, v1, w1),
        metric.distance(forest, v2, w2),
    )


def distance_estimate(
    u1: int,
    u2: int,
    forest: ForestState,
    metric: NodeMetric,
    r_acc: float,
) -> float:
    """Estimate ``d(u1, u2)`` from the four children of two edge-disjoint subtrees.

    Returns ``inf`` when any pair of the children is beyond *r_acc*.
    """
    forest.require(u1, u2)
    v1, w1 = forest.child_pair(u1)
    v2, w2 = forest.child_pair(u2)
    if _cut(forest, metric, (v1, w1, v2, w2), r_acc):
        return INF
    return _internal(forest, metric, v1, w1, v2, w2)


def is_short(
    pair1: tuple[int, int],
    pair2: tuple[int, int],
    forest: ForestState,
    metric: NodeMetric,
    r_acc: float,
    g: float,
    tol: float,
    *,
    delta: Decimal | None = None,
) -> tuple[bool, float]:
    """``(True, ν)`` when the internal length ``ν`` of ``pair1 | pair2`` is below ``g + tol``.

    With *delta*, ``ν`` is snapped to the grid before the comparison.
    """
    v1, w1 = pair1
    v2, w2 = pair2
    forest.require(v1, w1, v2, w2)
    if _cut(forest, metric, (v1, w1, v2, w2), r_acc):
        return False, 0.0
    nu = _internal(forest, metric, v1, w1, v2, w2)
    if delta is not None:
        nu = round_to_delta(nu, delta)
    if nu < g + tol:
        return True, nu
    return False, 0.0


def distorted_metric(
    x1: int,
    x2: int,
    forest: ForestState,
    metric: NodeMetric,
    r_acc: float,
    eps: float,
    *,
    memo: dict[EdgeKey, float] | None = None,
    delta: Decimal | None = None,
) -> float:
    """Distance between two subtree roots, certified by a multiple test.

    Each child pair gives ``distance_estimate(r1, r2) - h(x1, r1) - h(x2, r2)``;
    the result is the value for the second children when all four agree
    within ``eps / 2``, else ``inf``.  With *delta* every estimate is snapped
    to the grid before the test, so grid-valued ``h`` keeps all four terms
    on the grid.  *memo* caches the (snapped) estimates.
    """
    forest.require(x1, x2)
    kids1 = forest.child_pair(x1)
    kids2 = forest.child_pair(x2)
    values: dict[tuple[int, int], float] = {}
    for r1 in kids1:
        for r2 in kids2:
            if (r1, r2) in values:
                continue
            key = edge_key(r1, r2)
            if memo is not None and key in memo:
                estimate = memo[key]
            else:
                estimate = distance_estimate(r1, r2, forest, metric, r_acc)
                if delta is not None:
                    estimate = round_to_delta(estimate, delta)
                if memo is not None:
                    memo[key] = estimate
            if estimate == INF:
                return INF
            values[(r1, r2)] = estimate - forest.h(x1, r1) - forest.h(x2, r2)
    if max(values.values()) - min(values.values()) >= eps / 2:
        return INF
    return values[(kids1[1], kids2[1])]


# -- tables ---------------------------------------------------------------------------

class DistanceTable:
    """Symmetric node-pair distances with an optional lazy fill.

    Without *fill*, a missing pair raises :class:`MissingEntryError`; with
    it, the pair is computed on first access and kept.
    """

    __slots__ = ("_entries", "_fill")

    def __init__(
        self,
        entries: Mapping[tuple[int, int], float] | None = None,
        *,
        fill: Callable[[int, int], float] | None = None,
    ) -> None:
        self._entries: dict[EdgeKey, float] = {}
        for (x, y), value in (entries or {}).items():
            self._entries[edge_key(x, y)] = value
        self._fill = fill

    def __getitem__(self, pair: tuple[int, int]) -> float:
        x, y = pair
        if x == y:
            return 0.0
        key = edge_key(x, y)
        value = self._entries.get(key)
        if value is None:
            if self._fill is None:
                raise MissingEntryError(f"No distance between {x} and {y}.")
            value = self._fill(x, y)
            self._entries[key] = value
        return value

    def __setitem__(self, pair: tuple[int, int], value: float) -> None:
        self._entries[edge_key(*pair)] = value

    def __contains__(self, pair: object) -> bool:
        x, y = pair  # type: ignore[misc]
        return x == y or edge_key(x, y) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def max_over(self, nodes: Iterable[int]) -> float:
        """Largest pairwise distance among *nodes*."""
        members = list(nodes)
        return max((self[a, b] for a, b in itertools.combinations(members, 2)), default=0.0)

    def to_text(self, nodes: Iterable[int]) -> str:
        """Tab-separated matrix over *nodes*; unreachable pairs print as ``inf``."""
        order = sorted(nodes)
        lines = ["\t" + "\t".join(str(n) for n in order)]
        for a in order:
            cells = [("inf" if self[a, b] == INF else f"{self[a, b]:.6f}") for b in order]
            lines.append(f"{a}\t" + "\t".join(cells))
        return "\n".join(lines) + "\n"
