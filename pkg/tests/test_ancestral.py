"""Tests for the recursive-majority estimator and its exact correlation recursions."""

import math

import numpy as np
import pytest

from blindfold.ancestral import (
    CompletedTree,
    ConstantTies,
    MajorityConfig,
    TieStream,
    anc_estimate,
    choose_level_parameter,
    exact_maj_correlation,
    exact_reconstruction_correlation,
    maj_hat,
    recursive_majority,
)
from blindfold.errors import InvalidTreeError, NoAmplificationError
from blindfold.evolve import G_STAR, ModelSpec, simulate, theta_of_d
from blindfold.treekit import PhyloTree
from blindfold_lab.experiments import root_agreement
from blindfold_lab.oracle import brute_force_maj_correlation, monotonicity_probe
from blindfold_lab.scenarios import balanced_tree

G_PRIME = 0.12 + (G_STAR - 0.12) / 2
NESTED = [(5, 1, "0.1"), (5, 4, "0.1"), (4, 2, "0.1"), (4, 3, "0.1")]


@pytest.fixture(scope="module")
def config() -> MajorityConfig:
    return choose_level_parameter(theta_of_d(G_PRIME))


def _plain(levels: int) -> MajorityConfig:
    return MajorityConfig(levels=levels, beta=0.5, alpha=1.0, theta_min=0.75)


# -- majority primitives -----------------------------------------------------------

def test_maj_hat() -> None:
    assert maj_hat([1, 1, -1], 1) == 1
    assert maj_hat([-1, -1, 1, 1], -1) == -1
    assert maj_hat([-1, -1, 1, 1], 1) == 1
    assert maj_hat([1, -1], np.random.default_rng(0)) in (1, -1)


def test_recursive_majority_blocks() -> None:
    leaves = np.array([[1], [1], [-1], [-1], [1], [-1], [-1], [-1]])
    assert recursive_majority(leaves, 1, tie=1).tolist() == [1]
    assert recursive_majority(leaves, 3, tie=1).tolist() == [-1]
    with pytest.raises(InvalidTreeError):
        recursive_majority(leaves[:6], 2)


def test_completion_multiplicities() -> None:
    tree = PhyloTree.from_edges(NESTED, root=5)
    done = CompletedTree.of(tree, 5, 3)
    assert done.total_levels == 3
    assert done.leaf_multiplicity(1) == 4
    assert done.leaf_multiplicity(2) == 2
    assert sorted(done.preorder_leaves(tree)) == [1, 1, 1, 1, 2, 2, 3, 3]


# -- estimator -------------------------------------------------------------------------

def test_hand_example_tie_follows_tie_source() -> None:
    tree = PhyloTree.from_edges(NESTED, root=5)
    chars = {1: np.array([1, 1]), 2: np.array([-1, 1]), 3: np.array([-1, 1])}
    plus = anc_estimate(tree, chars, _plain(2), ConstantTies(1))
    minus = anc_estimate(tree, chars, _plain(2), ConstantTies(-1))
    assert plus.tolist() == [1, 1]
    assert minus.tolist() == [-1, 1]


def test_estimate_matches_direct_recursion_on_completed_tree() -> None:
    tree = balanced_tree(4, "0.1")
    chars = simulate(tree, ModelSpec.CFN, 300, seed=4)
    for ell in (1, 2, 3):
        done = CompletedTree.of(tree, tree.root, ell)
        rows = np.vstack([chars.sequence(leaf) for leaf in done.preorder_leaves(tree)])
        direct = recursive_majority(rows, ell, tie=1)
        assert np.array_equal(anc_estimate(tree, chars, _plain(ell), ConstantTies(1)), direct)


def test_estimate_is_deterministic_per_tie_seed() -> None:
    tree = balanced_tree(3, "0.1")
    chars = simulate(tree, ModelSpec.CFN, 500, seed=8)
    a = anc_estimate(tree, chars, _plain(1), TieStream(3))
    b = anc_estimate(tree, chars, _plain(1), TieStream(3))
    assert np.array_equal(a, b)


def test_subtree_root_override() -> None:
    tree = balanced_tree(2, "0.1")
    below = tree.children(tree.root)[0]
    chars = {leaf: np.array([1]) for leaf in tree.leaves}
    assert anc_estimate(tree, chars, _plain(1), ConstantTies(-1), root=below).tolist() == [1]


# -- exact correlations ----------------------------------------------------------------

@pytest.mark.parametrize("levels", [1, 2, 3, 4])
@pytest.mark.parametrize("eta", [0.3, 0.8, 1.0])
def test_count_recursion_matches_brute_force(levels: int, eta: float) -> None:
    theta = theta_of_d(0.12)
    assert exact_maj_correlation(levels, theta, eta) == pytest.approx(
        brute_force_maj_correlation(levels, theta, eta), abs=1e-12
    )


def test_cherry_correlation_is_mean_of_edges() -> None:
    tree = PhyloTree.from_edges([(3, 1, "0.05"), (3, 2, "0.1")], root=3)
    expected = (theta_of_d(0.05) + theta_of_d(0.1)) / 2
    assert exact_reconstruction_correlation(tree, _plain(1)) == pytest.approx(expected, abs=1e-12)


def test_balanced_reconstruction_matches_count_recursion() -> None:
    tree = balanced_tree(2, "0.12")
    theta = theta_of_d(0.12)
    assert exact_reconstruction_correlation(tree, _plain(2)) == pytest.approx(
        exact_maj_correlation(2, theta, 1.0), abs=1e-12
    )


def test_reconstruction_needs_root() -> None:
    with pytest.raises(InvalidTreeError):
        exact_reconstruction_correlation(balanced_tree(2, "0.1", rooted=False), _plain(1))


# -- level parameter ------------------------------------------------------------------

def test_level_parameter_is_certified(config: MajorityConfig) -> None:
    assert config.levels >= 2
    assert 0.0 < config.beta <= 1.0
    assert config.alpha > 1.0
    assert config.certify()
    assert exact_maj_correlation(config.levels, config.theta_min, config.beta) >= config.beta - 1e-9


def test_no_amplification_at_or_below_threshold() -> None:
    with pytest.raises(NoAmplificationError):
        choose_level_parameter(0.7)
    with pytest.raises(NoAmplificationError):
        choose_level_parameter(theta_of_d(0.2))


def test_level_search_respects_its_cap() -> None:
    with pytest.raises(NoAmplificationError, match="up to 1 "):
        choose_level_parameter(theta_of_d(G_PRIME), max_levels=1)


def test_block_majority_is_monotone(config: MajorityConfig) -> None:
    sweep = monotonicity_probe(config.levels, config.theta_min, np.linspace(0.0, 1.0, 41))
    assert sweep.monotone


# -- Monte Carlo ------------------------------------------------------------------------

def test_root_agreement_beats_certified_beta(config: MajorityConfig) -> None:
    k = 20_000
    rate = root_agreement(8, "0.12", k, seed=1, config=config)
    floor = (1 + config.beta) / 2 - 3 * math.sqrt(0.25 / k)
    assert rate >= floor


def test_estimate_is_symmetric_in_the_root_state(config: MajorityConfig) -> None:
    tree = balanced_tree(4, "0.12")
    chars = simulate(tree, ModelSpec.CFN, 40_000, seed=11, record_internal=True)
    truth = chars.internal[tree.root]
    estimate = anc_estimate(tree, chars, config, TieStream(5))
    keep_plus = float(np.mean(estimate[truth == 1] == 1))
    keep_minus = float(np.mean(estimate[truth == -1] == -1))
    assert keep_plus > 0.5 and keep_minus > 0.5
    assert keep_plus == pytest.approx(keep_minus, abs=0.025)


@pytest.mark.slow
@pytest.mark.parametrize("levels", [8, 10])
def test_root_agreement_full_scale(levels: int, config: MajorityConfig) -> None:
    k = 100_000
    rate = root_agreement(levels, "0.12", k, seed=levels, config=config)
    assert rate >= (1 + config.beta) / 2 - 3 * math.sqrt(0.25 / k)
