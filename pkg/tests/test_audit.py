"""Tests for the forest auditor's individual claims."""

import pytest

from blindfold.audit import (
    COLLISIONS,
    EDGE_LENGTHS,
    FALSE_POSITIVE_REMOVAL,
    ITERATION_BOUND,
    LEGAL_SUBFOREST,
    PROGRESS,
    WEIGHT_ESTIMATION,
    ForestAuditor,
)
from blindfold.errors import AuditViolationError
from blindfold.forest import ForestState
from blindfold.params import derive_params
from blindfold.treekit import PhyloTree

# 1, 2 hang off 5; 3, 4 off 6.
TRUE_TREE = PhyloTree.from_edges(
    [(5, 1, "0.06"), (5, 2, "0.06"), (5, 6, "0.04"), (6, 3, "0.06"), (6, 4, "0.06")]
)


@pytest.fixture
def auditor() -> ForestAuditor:
    return ForestAuditor(TRUE_TREE, derive_params("0.02", "0.12", "0.02", 4, k=1000))


@pytest.fixture
def forest() -> ForestState:
    return ForestState([1, 2, 3, 4])


def _claim(auditor: ForestAuditor, forest: ForestState, iteration: int = 0) -> str:
    with pytest.raises(AuditViolationError) as info:
        auditor.check_iteration(forest, iteration)
    return info.value.claim


def test_true_cherries_pass(auditor: ForestAuditor, forest: ForestState) -> None:
    auditor.start(forest)
    forest.add_cherry(1, 2, 0.06, 0.06, anchor=5)
    forest.add_cherry(3, 4, 0.06, 0.06, anchor=6)
    auditor.check_iteration(forest, 0)
    assert auditor.fixed_sizes == [4, 6]


def test_shared_true_edge_is_illegal(auditor: ForestAuditor, forest: ForestState) -> None:
    forest.add_cherry(1, 3, 0.06, 0.1, anchor=5)
    forest.add_cherry(2, 4, 0.1, 0.06, anchor=6)
    assert _claim(auditor, forest) == LEGAL_SUBFOREST


def test_long_forest_edge(auditor: ForestAuditor) -> None:
    tree = PhyloTree.from_edges(
        [(5, 1, "0.06"), (5, 2, "0.06"), (5, 6, "0.1"), (6, 3, "0.06"), (6, 4, "0.06")]
    )
    strict = ForestAuditor(tree, auditor.params)
    forest = ForestState([1, 2, 3, 4])
    forest.add_cherry(1, 3, 0.06, 0.16, anchor=5)
    assert _claim(strict, forest) == EDGE_LENGTHS


def test_inaccurate_length(auditor: ForestAuditor, forest: ForestState) -> None:
    forest.add_cherry(1, 2, 0.06, 0.05, anchor=5)
    assert _claim(auditor, forest) == WEIGHT_ESTIMATION


def test_close_trees_collide(auditor: ForestAuditor, forest: ForestState) -> None:
    forest.add_cherry(1, 3, 0.06, 0.1, anchor=5)
    assert _claim(auditor, forest) == COLLISIONS


def test_stalled_forest_breaks_progress(auditor: ForestAuditor, forest: ForestState) -> None:
    auditor.start(forest)
    assert _claim(auditor, forest) == PROGRESS


def test_progress_is_optional() -> None:
    lenient = ForestAuditor(
        TRUE_TREE, derive_params("0.02", "0.12", "0.02", 4, k=1000), check_progress=False
    )
    forest = ForestState([1, 2, 3, 4])
    lenient.start(forest)
    lenient.check_iteration(forest, 0)


def test_iteration_bound(auditor: ForestAuditor, forest: ForestState) -> None:
    assert _claim(auditor, forest, iteration=8) == ITERATION_BOUND


# -- removals ------------------------------------------------------------------------

def test_removal_of_real_collision_passes(auditor: ForestAuditor, forest: ForestState) -> None:
    top = forest.add_cherry(1, 3, 0.06, 0.1, anchor=5)
    auditor.check_removal(forest, 4, top, 3)
    assert auditor.removals_checked == 1


def test_removal_without_collision_is_flagged(
    auditor: ForestAuditor, forest: ForestState
) -> None:
    top = forest.add_cherry(1, 2, 0.06, 0.06, anchor=5)
    with pytest.raises(AuditViolationError) as info:
        auditor.check_removal(forest, 3, top, 1)
    assert info.value.claim == FALSE_POSITIVE_REMOVAL


def test_bundle_report(auditor: ForestAuditor, forest: ForestState) -> None:
    forest.add_cherry(1, 2, 0.06, 0.06, anchor=5)
    report = auditor.bundle_report(forest)
    assert report["leaves"] == 3
    assert report["fixed_roots"] >= 2
