"""Tests for the reconstruction loop and its three routines."""

import itertools
from decimal import Decimal

import pytest

from blindfold.bcp import MetricMode, RunOptions, bcp_run, detect_collision, local_cherry
from blindfold.distances import DistanceTable, TreeMetric
from blindfold.errors import (
    AlphabetMismatchError,
    InvalidRegimeError,
    LeafSetMismatchError,
    NonConvergenceError,
)
from blindfold.evolve import DeltaBMSpec, ModelSpec, random_delta_bm_tree, simulate
from blindfold.forest import ForestState
from blindfold.params import AlgoParams, derive_params
from blindfold.treekit import PathIndex, PhyloTree, check_binary, newick_parse, rf_distance
from blindfold_lab.experiments import Regime, reconstruct
from blindfold_lab.scenarios import caterpillar_tree, fake_cherry_tree

PERFECT = RunOptions(mode=MetricMode.PERFECT)
AUDITED = RunOptions(mode=MetricMode.PERFECT, audit=True)


def _params(n: int, k: int = 1000) -> AlgoParams:
    return derive_params("0.02", "0.12", "0.02", n, k=k)


def _random_tree(n: int, seed: int) -> PhyloTree:
    return random_delta_bm_tree(DeltaBMSpec(n, "0.02", "0.12", "0.02"), seed)


def _leaf_table(tree: PhyloTree) -> DistanceTable:
    index = PathIndex(tree)
    return DistanceTable(
        {(a, b): index.distance(a, b) for a, b in itertools.combinations(tree.leaves, 2)}
    )


# -- local cherry test ----------------------------------------------------------------

@pytest.fixture
def caterpillar() -> PhyloTree:
    return caterpillar_tree(8, "0.12")


def test_true_cherry_is_accepted(caterpillar: PhyloTree) -> None:
    forest = ForestState(caterpillar.leaves)
    metric = TreeMetric(PathIndex(caterpillar))
    cand = local_cherry(
        1, 2, forest, _leaf_table(caterpillar), metric, _params(8), delta=Decimal("0.02")
    )
    assert cand.accepted
    assert cand.l_v == pytest.approx(0.12)
    assert cand.l_w == pytest.approx(0.12)
    assert cand.z_v == 3


def test_distant_pair_is_rejected(caterpillar: PhyloTree) -> None:
    forest = ForestState(caterpillar.leaves)
    metric = TreeMetric(PathIndex(caterpillar))
    cand = local_cherry(1, 3, forest, _leaf_table(caterpillar), metric, _params(8))
    assert not cand.accepted
    assert cand.reason == "short-distance"


def test_isolated_pair_has_no_witness() -> None:
    table = DistanceTable({
        (1, 2): 0.2, (1, 3): 1.0, (1, 4): 1.0, (2, 3): 1.0, (2, 4): 1.0, (3, 4): 1.0,
    })
    cand = local_cherry(1, 2, ForestState([1, 2, 3, 4]), table, None, _params(4))
    assert cand.reason == "no-witness"


def test_pair_across_a_split_is_rejected() -> None:
    tree = newick_parse("((1:0.06,2:0.06):0.06,3:0.06,4:0.06);")
    table = _leaf_table(tree)
    cand = local_cherry(1, 3, ForestState([1, 2, 3, 4]), table, None, _params(4))
    assert not cand.accepted
    assert cand.reason == "split 2,4"


# -- collision detection -------------------------------------------------------------

HIDDEN_CHERRY = [
    (7, 1, 0.06), (7, 2, 0.06), (7, 8, 0.04), (8, 9, 0.04), (9, 4, 0.06), (9, 5, 0.06),
    (8, 10, 0.04), (10, 3, 0.06), (10, 6, 0.06),
]


def _anchored_table(forest: ForestState, tree: PhyloTree) -> DistanceTable:
    index = PathIndex(tree)

    def fill(x: int, y: int) -> float:
        return index.distance(forest.anchors.get(x, x), forest.anchors.get(y, y))

    return DistanceTable(fill=fill)


def test_detect_collision_finds_the_entered_edge() -> None:
    tree = PhyloTree.from_edges(HIDDEN_CHERRY)
    forest = ForestState([1, 2, 3, 4, 5, 6])
    v = forest.add_cherry(1, 2, 0.06, 0.06, anchor=7)
    u1 = forest.add_cherry(v, 3, 0.08, 0.06, anchor=10)
    u0 = forest.add_cherry(4, 5, 0.06, 0.06, anchor=9)
    table = _anchored_table(forest, tree)
    assert detect_collision(u0, u1, forest, table, _params(6)) == (True, v)


def test_detect_collision_leaves_true_cherries_alone() -> None:
    tree = PhyloTree.from_edges(HIDDEN_CHERRY)
    forest = ForestState([1, 2, 3, 4, 5, 6])
    v = forest.add_cherry(1, 2, 0.06, 0.06, anchor=7)
    u0 = forest.add_cherry(4, 5, 0.06, 0.06, anchor=9)
    table = _anchored_table(forest, tree)
    assert detect_collision(u0, v, forest, table, _params(6)) == (False, None)


# -- perfect mode -------------------------------------------------------------------------

def test_perfect_quartet() -> None:
    tree = newick_parse("((1:0.06,2:0.06):0.06,3:0.06,4:0.06);")
    result = bcp_run(None, _params(4), AUDITED, true_tree=tree)
    assert rf_distance(result.tree, tree) == 0
    assert result.iterations == 1
    assert {(c.v1, c.w1) for c in result.added_cherries()} == {(1, 2), (3, 4)}


def test_perfect_caterpillar(caterpillar: PhyloTree) -> None:
    result = bcp_run(None, _params(8), AUDITED, true_tree=caterpillar)
    check_binary(result.tree)
    assert rf_distance(result.tree, caterpillar) == 0


@pytest.mark.parametrize("seed", range(6))
def test_perfect_random_trees_with_audit(seed: int) -> None:
    n = 8 + 4 * (seed % 3)
    tree = _random_tree(n, seed)
    result = bcp_run(None, _params(n), AUDITED, true_tree=tree)
    assert rf_distance(result.tree, tree) == 0
    assert result.iterations <= 2 * n


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(200))
def test_perfect_random_trees_full(seed: int) -> None:
    n = (8, 16, 32, 64)[seed % 4]
    tree = _random_tree(n, seed)
    result = bcp_run(None, _params(n), AUDITED, true_tree=tree)
    assert rf_distance(result.tree, tree) == 0


def test_fake_cherry_is_added_then_removed() -> None:
    tree = fake_cherry_tree()
    result = bcp_run(None, _params(42), PERFECT, true_tree=tree)
    first = result.trace[0]
    assert first.phase == "cherries"
    fake = [c.node for c in first.cherries if {c.v1, c.w1} == {1, 2}]
    assert fake, "leaves 1 and 2 should first pass as a cherry"
    assert any(fake[0] in r.removed for r in result.removals())
    assert rf_distance(result.tree, tree) == 0


def test_trace_is_json_lines() -> None:
    tree = newick_parse("((1:0.06,2:0.06):0.06,3:0.06,4:0.06);")
    result = bcp_run(None, _params(4), PERFECT, true_tree=tree)
    lines = result.trace_lines().splitlines()
    assert [line.count('"phase"') for line in lines] == [1] * len(lines)
    assert '"phase": "join"' in lines[-1]


# -- statistical mode ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def quartet_chars():
    tree = newick_parse("((1:0.06,2:0.06):0.06,3:0.06,4:0.06);")
    return tree, simulate(tree, ModelSpec.CFN, 100_000, seed=21)


def test_statistical_quartet(quartet_chars) -> None:
    tree, chars = quartet_chars
    result = bcp_run(chars, _params(4, chars.k), RunOptions(tie_seed=3))
    assert rf_distance(result.tree, tree) == 0
    lengths = sorted(float(length) for _, _, length in result.tree.edges())
    assert lengths[-1] == pytest.approx(0.06, abs=0.005)


def test_statistical_quartet_with_audit(quartet_chars) -> None:
    tree, chars = quartet_chars
    options = RunOptions(audit=True)
    assert rf_distance(bcp_run(chars, _params(4, chars.k), options, true_tree=tree).tree, tree) == 0


def test_statistical_eight_leaves_with_audit() -> None:
    tree = _random_tree(8, 0)
    chars = simulate(tree, ModelSpec.CFN, 400_000, seed=0)
    options = RunOptions(audit=True, tie_seed=0)
    result = bcp_run(chars, _params(8, chars.k), options, true_tree=tree)
    assert rf_distance(result.tree, tree) == 0


def test_jc_quartet_through_class_reduction() -> None:
    tree = newick_parse("((1:0.04,2:0.04):0.04,3:0.04,4:0.04);")
    chars = simulate(tree, ModelSpec.JC, 100_000, seed=5)
    regime = Regime(f="0.02", g="0.06", delta="0.02", model=ModelSpec.JC)
    done = reconstruct(chars, regime)
    assert done.scale == 2
    assert done.params.g == pytest.approx(0.12)
    assert rf_distance(done.tree, tree) == 0
    leaf_edges = [float(length) for a, b, length in done.tree.edges() if min(a, b) <= 4]
    assert leaf_edges == pytest.approx([0.04] * 4, abs=0.005)


def test_worker_count_does_not_change_the_run() -> None:
    tree = _random_tree(8, 2)
    chars = simulate(tree, ModelSpec.CFN, 3000, seed=2)

    def outcome(workers: int) -> str:
        options = RunOptions(workers=workers, tie_seed=2)
        try:
            return bcp_run(chars, _params(8, chars.k), options).trace_lines()
        except NonConvergenceError as exc:
            return exc.message

    assert outcome(1) == outcome(4)


# -- errors --------------------------------------------------------------------------------------

def test_perfect_mode_needs_true_tree() -> None:
    with pytest.raises(InvalidRegimeError):
        bcp_run(None, _params(4), PERFECT)


def test_statistical_mode_needs_characters() -> None:
    with pytest.raises(InvalidRegimeError):
        bcp_run(None, _params(4), RunOptions())


def test_jc_input_must_be_reduced() -> None:
    tree = newick_parse("((1:0.04,2:0.04):0.04,3:0.04,4:0.04);")
    chars = simulate(tree, ModelSpec.JC, 100, seed=1)
    with pytest.raises(AlphabetMismatchError):
        bcp_run(chars, _params(4, 100))


def test_leaf_sets_must_match(quartet_chars) -> None:
    _, chars = quartet_chars
    other = newick_parse("((1:0.06,2:0.06):0.06,3:0.06,5:0.06);")
    with pytest.raises(LeafSetMismatchError):
        bcp_run(chars, _params(4, chars.k), RunOptions(audit=True), true_tree=other)


def test_iteration_cap() -> None:
    tree = _random_tree(16, 1)
    options = RunOptions(mode=MetricMode.PERFECT, max_iterations=1)
    with pytest.raises(NonConvergenceError):
        bcp_run(None, _params(16), options, true_tree=tree)
