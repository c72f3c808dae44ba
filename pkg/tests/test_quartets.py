"""Tests for the four-point split and collision tests."""

import itertools
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindfold.distances import INF, DistanceTable
from blindfold.errors import DuplicateNodeError, ForestStructureError
from blindfold.evolve import DeltaBMSpec, random_delta_bm_tree
from blindfold.forest import ForestState
from blindfold.quartets import collision_test, is_collision, is_split
from blindfold.treekit import PathIndex, PhyloTree, bipartitions, true_quartet_split

F = 0.02


def _table(tree: PhyloTree, noise: dict | None = None) -> DistanceTable:
    index = PathIndex(tree)
    entries = {}
    for a, b in itertools.combinations(tree.leaves, 2):
        entries[(a, b)] = index.distance(a, b) + (noise or {}).get((a, b), 0.0)
    return DistanceTable(entries)


def _check_all_quartets(tree: PhyloTree, table: DistanceTable) -> None:
    for quartet in itertools.combinations(tree.leaves, 4):
        split = true_quartet_split(tree, quartet)
        assert split is not None
        (a, b), (c, d) = split.first, split.second
        assert is_split((a, b), (c, d), table, F)
        assert is_split((b, a), (d, c), table, F)
        assert not is_split((a, c), (b, d), table, F)
        assert not is_split((a, d), (b, c), table, F)


# -- split test --------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(100))
def test_split_test_is_exact_on_tree_metrics(seed: int) -> None:
    n = 4 + seed % 7
    tree = random_delta_bm_tree(DeltaBMSpec(n, "0.02", "0.12", "0.02"), seed)
    _check_all_quartets(tree, _table(tree))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_split_test_tolerates_small_perturbations(seed: int, data: st.DataObject) -> None:
    tree = random_delta_bm_tree(DeltaBMSpec(7, "0.02", "0.12", "0.02"), seed)
    bound = F / 4 - 1e-6
    noise = {
        pair: data.draw(st.floats(-bound, bound))
        for pair in itertools.combinations(tree.leaves, 2)
    }
    _check_all_quartets(tree, _table(tree, noise))


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("sign", [1, -1])
def test_split_test_survives_adversarial_noise(seed: int, sign: int) -> None:
    """Pairs across one true split move one way, pairs on the same side the other."""
    tree = random_delta_bm_tree(DeltaBMSpec(8, "0.02", "0.12", "0.02"), seed)
    bound = F / 4 - 1e-6
    for split in sorted(bipartitions(tree), key=lambda s: sorted(s.side_a)):
        noise = {
            (a, b): (-bound if (a in split.side_a) != (b in split.side_a) else bound) * sign
            for a, b in itertools.combinations(tree.leaves, 2)
        }
        _check_all_quartets(tree, _table(tree, noise))


def test_split_tie_at_margin_counts_as_split() -> None:
    table = DistanceTable({
        (1, 2): 0.12, (3, 4): 0.46, (1, 3): 0.3, (2, 4): 0.3, (1, 4): 0.5, (2, 3): 0.5,
    })
    assert is_split((1, 2), (3, 4), table, F)


def test_split_test_needs_four_nodes() -> None:
    table = DistanceTable({(1, 2): 0.1, (1, 3): 0.1, (2, 3): 0.1})
    with pytest.raises(DuplicateNodeError):
        is_split((1, 2), (1, 3), table, F)


def test_unknown_distance_counts_as_split() -> None:
    table = DistanceTable(fill=lambda x, y: INF)
    assert is_split((1, 2), (3, 4), table, F)


# -- collision test ---------------------------------------------------------------------

def _collision_setup(true_edges: list) -> tuple[ForestState, int, int, DistanceTable, float]:
    tree = PhyloTree.from_edges(true_edges)
    index = PathIndex(tree)
    forest = ForestState([1, 2, 3, 4])
    v = forest.add_cherry(1, 2, index.distance(5, 1), index.distance(5, 2), anchor=5)
    h_uv = index.distance(5, 7)
    u = forest.add_cherry(v, 3, h_uv, index.distance(7, 3), anchor=7)
    return forest, v, u, _table(tree), h_uv


def test_reference_point_inside_edge_collides() -> None:
    edges = [(5, 1, 0.06), (5, 2, 0.06), (5, 6, 0.04), (6, 4, 0.06), (6, 7, 0.04), (7, 3, 0.06)]
    forest, v, u, table, h_uv = _collision_setup(edges)
    verdict = collision_test(4, v, 3, u, h_uv, forest, table, F)
    assert verdict.collides
    assert verdict.nu == pytest.approx(0.04)
    assert is_collision(4, v, 3, u, h_uv, forest, table, F)


def test_reference_point_beyond_edge_does_not_collide() -> None:
    edges = [(5, 1, 0.06), (5, 2, 0.06), (5, 7, 0.08), (7, 8, 0.04), (8, 3, 0.06), (8, 4, 0.06)]
    forest, v, u, table, h_uv = _collision_setup(edges)
    verdict = collision_test(4, v, 3, u, h_uv, forest, table, F)
    assert not verdict
    assert h_uv - verdict.nu < 0


def test_collision_test_needs_a_forest_edge() -> None:
    edges = [(5, 1, 0.06), (5, 2, 0.06), (5, 6, 0.04), (6, 4, 0.06), (6, 7, 0.04), (7, 3, 0.06)]
    forest, v, u, table, h_uv = _collision_setup(edges)
    with pytest.raises(ForestStructureError):
        collision_test(4, v, 1, u, h_uv, forest, table, F)


def test_collision_tie_at_margin_is_not_a_collision() -> None:
    forest = ForestState([1, 2, 3, 4])
    v = forest.add_cherry(1, 2, 0.06, 0.06)
    u = forest.add_cherry(v, 3, 0.1, 0.06)
    table = DistanceTable({
        (1, 2): 0.12, (1, 4): 0.3, (2, 3): 0.24, (3, 4): 0.24, (1, 3): 0.24, (2, 4): 0.3,
    })
    verdict = collision_test(4, v, 3, u, 0.1, forest, table, F)
    assert verdict.nu == pytest.approx(0.09)
    assert not verdict


# -- exhaustive attachment sweep -------------------------------------------------------------

GRID = Decimal("0.02")


def _attached(edge_units: int, at_units: int, pendant: Decimal, *, beyond: bool) -> tuple:
    """Forest edge (u, v) of ``edge_units`` grid steps; leaf 4 hangs off the true tree.

    True-tree ids: 5 anchors v, 6 anchors u, 7 is where leaf 4 attaches.  With
    *beyond* the attachment sits on the edge above u instead of inside (u, v).
    """
    h_uv = GRID * edge_units
    at = GRID * at_units
    if beyond:
        edges = [
            (5, 1, "0.06"), (5, 2, "0.06"), (5, 6, h_uv),
            (6, 7, at), (7, 3, Decimal("0.2") - at), (7, 4, pendant),
        ]
    else:
        edges = [
            (5, 1, "0.06"), (5, 2, "0.06"), (5, 7, at), (7, 6, h_uv - at),
            (7, 4, pendant), (6, 3, "0.06"),
        ]
    tree = PhyloTree.from_edges(edges)
    forest = ForestState([1, 2, 3, 4])
    v = forest.add_cherry(1, 2, 0.06, 0.06)
    u = forest.add_cherry(v, 3, float(h_uv), 0.06)
    return forest, v, u, _table(tree), float(h_uv)


INSIDE = [
    (edge, at, pendant)
    for edge in range(2, 7)
    for at in range(1, edge)
    for pendant in (Decimal("0.02"), Decimal("0.12"))
]


@pytest.mark.parametrize(("edge", "at", "pendant"), INSIDE)
def test_every_inner_attachment_collides(edge: int, at: int, pendant: Decimal) -> None:
    forest, v, u, table, h_uv = _attached(edge, at, pendant, beyond=False)
    verdict = collision_test(4, v, 3, u, h_uv, forest, table, F)
    assert verdict.collides
    assert verdict.nu == pytest.approx(float(GRID * at))


@pytest.mark.parametrize("edge", range(1, 7))
@pytest.mark.parametrize("at", range(1, 9))
def test_attachment_beyond_the_edge_never_collides(edge: int, at: int) -> None:
    forest, v, u, table, h_uv = _attached(edge, at, Decimal("0.06"), beyond=True)
    verdict = collision_test(4, v, 3, u, h_uv, forest, table, F)
    assert not verdict.collides
    assert verdict.nu == pytest.approx(h_uv + float(GRID * at))
