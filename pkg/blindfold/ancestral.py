"""Recursive-majority ancestral state reconstruction.

The estimator completes a rooted subtree to a full binary tree whose
depth is a multiple of ``ℓ`` (added edges copy states exactly) and then
takes randomised majorities ``ℓ`` levels at a time, bottom up.  The
completion is never materialised: a leaf at depth ``d`` inside a block
simply counts ``2**(ℓ - d)`` times in that block's majority.

The level parameter ``ℓ`` and the guaranteed correlation ``β`` come from
an exact dynamic program over the count of ``+1`` leaves of a balanced
tree with uniform edge correlation (:func:`choose_level_parameter`).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
from scipy.signal import fftconvolve

from blindfold.errors import (
    AlphabetMismatchError,
    InvalidTreeError,
    NoAmplificationError,
    UnknownNodeError,
)
from blindfold.evolve import THETA_STAR, CharacterMatrix, ModelSpec, theta_of_d
from blindfold.streams import STREAM_TIE, sign_bits
from blindfold.treekit import PhyloTree

logger = logging.getLogger(__name__)

_MAX_EXACT_LEVELS = 20
_FFT_THRESHOLD = 1 << 12
_SLOPE_PROBE = 1e-6
_GRID_SIZE = 400
_BISECTION_STEPS = 60
_TOLERANCE = 1e-12


class RootedTopology(Protocol):
    def children(self, node: int) -> Sequence[int]: ...


class TieSource(Protocol):
    def bits(self, root: int, block: int, k: int) -> np.ndarray: ...


class TieStream:
    """Fair ±1 tie bits keyed by ``(seed, estimate root, block node, site)``."""

    __slots__ = ("seed",)

    def __init__(self, seed: int) -> None:
        self.seed = seed

    def bits(self, root: int, block: int, k: int) -> np.ndarray:
        return sign_bits(self.seed, STREAM_TIE, root, block, size=k)


class ConstantTies:
    """Every tie resolves to the same value."""

    __slots__ = ("value",)

    def __init__(self, value: int = 1) -> None:
        self.value = 1 if value > 0 else -1

    def bits(self, root: int, block: int, k: int) -> np.ndarray:
        return np.full(k, self.value, dtype=np.int8)


@dataclass(frozen=True)
class MajorityConfig:
    """Certified recursive-majority parameters.

    Parameters
    ----------
    levels:
        ``ℓ``, levels per majority block.
    beta:
        Guaranteed correlation of the estimate with the true state.
    alpha:
        Small-noise amplification slope of one block (diagnostic).
    theta_min:
        Smallest edge correlation the configuration is certified for.
    """

    levels: int
    beta: float
    alpha: float
    theta_min: float

    def certify(self) -> bool:
        """Re-check that one block maps noise level β to at least β."""
        value = exact_maj_correlation(self.levels, self.theta_min, self.beta)
        return value >= self.beta - _TOLERANCE

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "beta": self.beta,
            "alpha": self.alpha,
            "theta_min": self.theta_min,
        }


# -- majority ------------------------------------------------------------------

def maj_hat(values: Sequence[int], tie: np.random.Generator | int) -> int:
    """Majority of ±1 *values*; a tie is broken by the fair bit from *tie*."""
    total = int(np.sum(values))
    if total:
        return 1 if total > 0 else -1
    if isinstance(tie, np.random.Generator):
        return 1 if tie.integers(0, 2) else -1
    return 1 if tie > 0 else -1


def recursive_majority(
    leaves: np.ndarray,
    levels_per_block: int,
    tie: np.random.Generator | int = 1,
) -> np.ndarray:
    """Direct recursive majority over ``2**(J·ℓ)`` pre-ordered leaf rows.

    *leaves* has shape ``(2**(J·ℓ), k)``; the result has shape ``(k,)``.
    """
    values = np.asarray(leaves, dtype=np.int64)
    if values.ndim == 1:
        values = values[:, None]
    block = 1 << levels_per_block
    rows = values.shape[0]
    while rows > 1:
        if rows % block:
            raise InvalidTreeError(f"{rows} rows do not split into blocks of {block}.")
        sums = values.reshape(rows // block, block, -1).sum(axis=1)
        if isinstance(tie, np.random.Generator):
            bits = 2 * tie.integers(0, 2, size=sums.shape) - 1
        else:
            bits = np.full(sums.shape, 1 if tie > 0 else -1)
        values = np.where(sums > 0, 1, np.where(sums < 0, -1, bits))
        rows = values.shape[0]
    return values[0].astype(np.int8)


# -- completion ----------------------------------------------------------------

@dataclass(frozen=True)
class CompletedTree:
    """A rooted subtree completed to ``total_levels`` full binary levels."""

    root: int
    levels_per_block: int
    total_levels: int
    leaf_depths: Mapping[int, int]

    @classmethod
    def of(cls, tree: RootedTopology, root: int, levels_per_block: int) -> CompletedTree:
        depths: dict[int, int] = {}
        stack = [(root, 0)]
        while stack:
            node, depth = stack.pop()
            kids = tree.children(node)
            if not kids:
                depths[node] = depth
            stack.extend((c, depth + 1) for c in kids)
        deepest = max(depths.values())
        blocks = math.ceil(deepest / levels_per_block)
        return cls(root, levels_per_block, blocks * levels_per_block, depths)

    def leaf_multiplicity(self, leaf: int) -> int:
        """Number of completed leaves that copy *leaf*."""
        return 1 << (self.total_levels - self.leaf_depths[leaf])

    def preorder_leaves(self, tree: RootedTopology) -> list[int]:
        """Original leaf behind each completed leaf, in pre-order."""
        out: list[int] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            kids = tree.children(node)
            if not kids:
                out.extend([node] * self.leaf_multiplicity(node))
            else:
                stack.extend(reversed(kids))
        return out


def _leaf_lookup(chars: CharacterMatrix | Mapping[int, np.ndarray]) -> Callable[[int], np.ndarray]:
    if isinstance(chars, CharacterMatrix):
        if chars.model is not ModelSpec.CFN:
            raise AlphabetMismatchError("Reconstruction needs ±1 data; reduce JC input first.")
        return chars.sequence

    def lookup(label: int) -> np.ndarray:
        try:
            return chars[label]
        except KeyError:
            raise UnknownNodeError(f"No sequence for leaf {label!r}.") from None

    return lookup


def anc_estimate(
    tree: RootedTopology,
    chars: CharacterMatrix | Mapping[int, np.ndarray],
    config: MajorityConfig,
    ties: TieSource,
    *,
    root: int | None = None,
) -> np.ndarray:
    """Recursive-majority estimate of the sequence at *root*.

    *tree* only needs a ``children(node)`` method; *root* defaults to
    ``tree.root``.  Tie bits are requested per ``(root, block node)``.
    """
    start: int = getattr(tree, "root") if root is None else root
    lookup = _leaf_lookup(chars)
    ell = config.levels

    def block_value(node: int) -> np.ndarray:
        kids = tree.children(node)
        if not kids:
            return lookup(node)
        total: np.ndarray | None = None
        stack = [(c, 1) for c in kids]
        while stack:
            cur, depth = stack.pop()
            grand = tree.children(cur)
            if grand and depth < ell:
                stack.extend((c, depth + 1) for c in grand)
                continue
            part = (block_value(cur) if grand else lookup(cur)).astype(np.int64)
            weight = 1 << (ell - depth)
            total = part * weight if total is None else total + part * weight
        assert total is not None
        bits = ties.bits(start, node, total.shape[0])
        return np.where(total > 0, 1, np.where(total < 0, -1, bits)).astype(np.int8)

    return block_value(start)


# -- exact correlation recursion -------------------------------------------------

def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size < _FFT_THRESHOLD:
        return np.convolve(a, b)
    return np.clip(fftconvolve(a, b), 0.0, None)


def _count_distribution(levels: int, theta: float, eta: float) -> np.ndarray:
    """P(number of +1 leaves = c | root = +1) on the balanced tree."""
    q = (1.0 + theta * eta) / 2.0
    plus = np.array([(1 - q) ** 2, 2 * q * (1 - q), q * q])
    keep = (1.0 + theta) / 2.0
    for _ in range(levels - 1):
        child = keep * plus + (1.0 - keep) * plus[::-1]
        plus = _convolve(child, child)
    return plus


def exact_maj_correlation(levels: int, theta: float, eta: float) -> float:
    """``E[Maj̭(leaves) | root = +1]`` for the ``levels``-level binary tree.

    Internal edges have correlation *theta*, leaf edges ``theta * eta``.
    """
    dist = _count_distribution(levels, theta, eta)
    half = (dist.size - 1) / 2.0
    counts = np.arange(dist.size)
    return float(dist[counts > half].sum() - dist[counts < half].sum())


def _fixed_point(levels: int, theta: float) -> float:
    grid = np.geomspace(_SLOPE_PROBE, 1.0, _GRID_SIZE)
    last_ok = 0.0
    for eta in grid:
        if exact_maj_correlation(levels, theta, float(eta)) >= eta - _TOLERANCE:
            last_ok = float(eta)
            continue
        lo, hi = last_ok, float(eta)
        if lo == 0.0:
            return 0.0
        for _ in range(_BISECTION_STEPS):
            mid = (lo + hi) / 2.0
            if exact_maj_correlation(levels, theta, mid) >= mid - _TOLERANCE:
                lo = mid
            else:
                hi = mid
        return lo
    return 1.0


def choose_level_parameter(theta_min: float, *, max_levels: int = 64) -> MajorityConfig:
    """Smallest ``ℓ`` whose block majority has a noise-reduction fixed point.

    The search stops at ``min(max_levels, 20)``: the exact count law of an
    ``ℓ``-level block has ``2**ℓ + 1`` entries.  Raises
    :class:`NoAmplificationError` when ``θ_min`` is not above
    ``θ* = 2^{-1/2}`` or no ``ℓ`` in that range works.
    """
    if theta_min >= 1.0 - _TOLERANCE:
        return MajorityConfig(levels=1, beta=1.0, alpha=1.0, theta_min=1.0)
    if 2.0 * theta_min * theta_min <= 1.0:
        raise NoAmplificationError(
            f"θ_min={theta_min:.6f} is not above θ*={THETA_STAR:.6f}; lower g."
        )
    limit = min(max_levels, _MAX_EXACT_LEVELS)
    for ell in range(1, limit + 1):
        slope = exact_maj_correlation(ell, theta_min, _SLOPE_PROBE) / _SLOPE_PROBE
        if slope <= 1.0:
            continue
        beta = _fixed_point(ell, theta_min)
        if beta > 0.0:
            config = MajorityConfig(levels=ell, beta=beta, alpha=slope, theta_min=theta_min)
            logger.debug("majority config %s", config)
            return config
    raise NoAmplificationError(
        f"No block depth up to {limit} amplifies at θ_min={theta_min:.6f}."
    )


# -- exact channel correlation (analytic mode) -------------------------------------------

_MAX_ENUMERATED_NODES = 18


def exact_reconstruction_correlation(tree: PhyloTree, config: MajorityConfig) -> float:
    """Exact ``E[σ_root · σ̂_root]`` for a small rooted tree, ties fair.

    Enumerates every state assignment (at most ``2**18``), so it is an
    oracle for tiny subtrees only.
    """
    root = tree.root
    if root is None:
        raise InvalidTreeError("Tree must be rooted at the reconstructed node.")
    order = [root]
    for node in order:
        order.extend(tree.children(node))
    if len(order) - 1 > _MAX_ENUMERATED_NODES:
        raise InvalidTreeError(f"Tree has {len(order)} nodes; too many to enumerate.")
    parent = tree.parents
    theta = {node: theta_of_d(tree.length(node, parent[node])) for node in order[1:]}
    leaves = [node for node in order if not tree.children(node)]

    leaf_law: dict[tuple[int, ...], float] = {}
    for assignment in itertools.product((1, -1), repeat=len(order) - 1):
        state = {root: 1, **dict(zip(order[1:], assignment))}
        prob = 1.0
        for node in order[1:]:
            same = state[node] == state[parent[node]]  # type: ignore[index]
            prob *= (1 + theta[node]) / 2 if same else (1 - theta[node]) / 2
        key = tuple(state[leaf] for leaf in leaves)
        leaf_law[key] = leaf_law.get(key, 0.0) + prob

    total = 0.0
    for key, prob in leaf_law.items():
        values = dict(zip(leaves, key))
        total += prob * (2.0 * _plus_probability(tree, root, values, config.levels) - 1.0)
    return total


def _plus_probability(tree: PhyloTree, node: int, values: Mapping[int, int], ell: int) -> float:
    kids = tree.children(node)
    if not kids:
        return 1.0 if values[node] > 0 else 0.0
    parts: list[tuple[int, float]] = []
    stack = [(c, 1) for c in kids]
    while stack:
        cur, depth = stack.pop()
        grand = tree.children(cur)
        if grand and depth < ell:
            stack.extend((c, depth + 1) for c in grand)
            continue
        parts.append((1 << (ell - depth), _plus_probability(tree, cur, values, ell)))
    sums = {0: 1.0}
    for weight, p_plus in parts:
        nxt: dict[int, float] = {}
        for s, p in sums.items():
            if p_plus > 0:
                nxt[s + weight] = nxt.get(s + weight, 0.0) + p * p_plus
            if p_plus < 1:
                nxt[s - weight] = nxt.get(s - weight, 0.0) + p * (1 - p_plus)
        sums = nxt
    return sum(p for s, p in sums.items() if s > 0) + 0.5 * sums.get(0, 0.0)
