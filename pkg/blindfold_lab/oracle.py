"""Brute-force oracles for the closed forms the library relies on.

Everything here enumerates; nothing is meant to scale.  The oracles back
the checks printed by ``blindfold oracle-check`` and several tests.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from blindfold.ancestral import choose_level_parameter, exact_maj_correlation
from blindfold.evolve import (
    G_STAR,
    P_STAR,
    THETA_STAR,
    ModelSpec,
    jc_class_transition_matrix,
    p_of_d,
    theta_of_d,
    transition_matrix,
)
from blindfold.treekit import PhyloTree, path_distance, reroot
from blindfold_lab.errors import OracleTooLargeError

logger = logging.getLogger(__name__)

_MAX_STATES = 1 << 18
_MAX_LEAF_CONFIGS = 1 << 16
_CHECK_TOLERANCE = 1e-12


# -- joint leaf law ------------------------------------------------------------------

@dataclass(frozen=True)
class LeafDistribution:
    """Exact joint law of the leaf states.

    ``probs`` is indexed by leaf-state tuples in ``labels`` order, each
    state a model symbol (±1 for CFN, 0..3 for JC).
    """

    labels: tuple[int, ...]
    model: ModelSpec
    probs: Mapping[tuple[int, ...], float]

    def probability(self, states: Mapping[int, int]) -> float:
        """Marginal probability of a partial leaf assignment."""
        cols = [self.labels.index(label) for label in states]
        want = tuple(states.values())
        return sum(p for key, p in self.probs.items() if tuple(key[c] for c in cols) == want)

    def total(self) -> float:
        return sum(self.probs.values())


def _symbols(model: ModelSpec) -> tuple[int, ...]:
    return (1, -1) if model is ModelSpec.CFN else (0, 1, 2, 3)


def oracle_enumerate_small(
    tree: PhyloTree,
    model: ModelSpec,
    *,
    root: int | None = None,
) -> LeafDistribution:
    """Sum the product formula over every state assignment of *tree*.

    Raises :class:`OracleTooLargeError` beyond ``2**18`` assignments.
    """
    rooted = tree if tree.root is not None else reroot(tree, root or tree.nodes[0])
    order = [rooted.root]
    for node in order:
        order.extend(rooted.children(node))
    s = model.n_states
    total = s ** len(order)
    if total > _MAX_STATES:
        raise OracleTooLargeError(
            f"{len(order)} nodes with {s} states is {total} assignments (limit {_MAX_STATES})."
        )

    position = {node: i for i, node in enumerate(order)}
    assignments = np.array(list(itertools.product(range(s), repeat=len(order))), dtype=np.int64)
    weights = model.root_prior[assignments[:, 0]]
    parents = rooted.parents
    for node in order[1:]:
        parent = parents[node]
        matrix = transition_matrix(model, rooted.length(parent, node))  # type: ignore[arg-type]
        weights = weights * matrix[assignments[:, position[parent]], assignments[:, position[node]]]

    labels = tuple(sorted(tree.leaves))
    cols = [position[label] for label in labels]
    flat = np.ravel_multi_index(assignments[:, cols].T, (s,) * len(cols))
    marginal = np.bincount(flat, weights=weights, minlength=s ** len(cols))
    symbols = _symbols(model)
    probs = {
        tuple(symbols[i] for i in np.unravel_index(idx, (s,) * len(cols))): float(p)
        for idx, p in enumerate(marginal)
    }
    logger.debug("enumerated %d assignments over %d leaves", total, len(labels))
    return LeafDistribution(labels, model, probs)


def leaf_correlation(dist: LeafDistribution, a: int, b: int) -> float:
    """``E[σ_a σ_b]`` under a CFN leaf law."""
    i, j = dist.labels.index(a), dist.labels.index(b)
    return sum(p * key[i] * key[j] for key, p in dist.probs.items())


# -- recursive majority --------------------------------------------------------------

def brute_force_maj_correlation(
    levels: int,
    theta: float,
    eta: float = 1.0,
    *,
    edge_thetas: Mapping[int, float] | None = None,
) -> float:
    """``E[Maj̭(leaves) | root = +1]`` by enumerating every leaf configuration.

    Nodes are heap-numbered (root 1, children ``2i`` and ``2i + 1``).  Edges
    into internal nodes have correlation *theta*, edges into leaves
    ``theta * eta``; *edge_thetas* overrides single edges by child index.
    Ties count zero.
    """
    n_leaves = 1 << levels
    if 1 << n_leaves > _MAX_LEAF_CONFIGS:
        raise OracleTooLargeError(f"{n_leaves} leaves is too many to enumerate.")
    overrides = edge_thetas or {}

    def edge(child: int) -> float:
        if child in overrides:
            return overrides[child]
        return theta * eta if child >= n_leaves else theta

    configs = np.array(list(itertools.product((1, -1), repeat=n_leaves)), dtype=np.int64)
    # likelihood[node] = (P(leaves below | node=+1), P(leaves below | node=-1))
    likelihood: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for i, leaf in enumerate(range(n_leaves, 2 * n_leaves)):
        column = configs[:, i]
        likelihood[leaf] = ((column > 0).astype(float), (column < 0).astype(float))
    for node in range(n_leaves - 1, 0, -1):
        plus = np.ones(len(configs))
        minus = np.ones(len(configs))
        for child in (2 * node, 2 * node + 1):
            t = edge(child)
            c_plus, c_minus = likelihood.pop(child)
            plus *= (1 + t) / 2 * c_plus + (1 - t) / 2 * c_minus
            minus *= (1 - t) / 2 * c_plus + (1 + t) / 2 * c_minus
        likelihood[node] = (plus, minus)
    root_law = likelihood[1][0]
    vote = np.sign(configs.sum(axis=1))
    return float(np.dot(root_law, vote))


@dataclass(frozen=True)
class MonotonicityProbe:
    levels: int
    theta: float
    etas: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def monotone(self) -> bool:
        return all(b >= a - _CHECK_TOLERANCE for a, b in zip(self.values, self.values[1:]))


def monotonicity_probe(levels: int, theta: float, etas: Sequence[float]) -> MonotonicityProbe:
    """Block majority correlation along an increasing grid of input noise levels."""
    grid = tuple(sorted(float(e) for e in etas))
    values = tuple(exact_maj_correlation(levels, theta, e) for e in grid)
    return MonotonicityProbe(levels, theta, grid, values)


# -- closed-form checks ----------------------------------------------------------------

@dataclass(frozen=True)
class OracleCheck:
    name: str
    value: float
    expected: float
    tolerance: float = _CHECK_TOLERANCE

    @property
    def error(self) -> float:
        return abs(self.value - self.expected)

    @property
    def ok(self) -> bool:
        return self.error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "expected": self.expected,
            "error": self.error,
            "ok": self.ok,
        }


def _three_leaf_tree() -> PhyloTree:
    return PhyloTree.from_edges([(4, 1, "0.06"), (4, 2, "0.12"), (4, 3, "0.1")])


def oracle_check(*, g: float = 0.12, levels: int = 3) -> list[OracleCheck]:
    """Threshold constants, the JC class reduction and both enumeration oracles."""
    checks = [
        OracleCheck("theta(g*)", theta_of_d(G_STAR), THETA_STAR),
        OracleCheck("p_cfn(g*)", p_of_d(ModelSpec.CFN, G_STAR), P_STAR),
        OracleCheck("2 theta*^2", 2 * THETA_STAR ** 2, 1.0),
    ]
    for d in (0.02, g, G_STAR / 2):
        diff = jc_class_transition_matrix(d) - transition_matrix(ModelSpec.CFN, 2 * d)
        checks.append(OracleCheck(f"jc-class({d:.6g})", float(np.abs(diff).max()), 0.0))

    tree = _three_leaf_tree()
    law = oracle_enumerate_small(tree, ModelSpec.CFN)
    checks.append(OracleCheck("leaf-law-total", law.total(), 1.0))
    for a, b in itertools.combinations(tree.leaves, 2):
        expected = math.exp(-2 * float(path_distance(tree, a, b)))
        checks.append(OracleCheck(f"corr({a},{b})", leaf_correlation(law, a, b), expected))

    theta = theta_of_d(g)
    config = choose_level_parameter(theta_of_d(g + (G_STAR - g) / 2))
    for ell in range(1, min(levels, 4) + 1):
        checks.append(OracleCheck(
            f"maj({ell})",
            exact_maj_correlation(ell, theta, config.beta),
            brute_force_maj_correlation(ell, theta, config.beta),
        ))
    checks.append(OracleCheck(
        "beta-fixed-point",
        exact_maj_correlation(config.levels, config.theta_min, config.beta),
        config.beta,
        tolerance=1e-9,
    ))
    for check in checks:
        logger.debug("oracle %s: error %.3g", check.name, check.error)
    return checks
