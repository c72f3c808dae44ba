"""Four-point tests on a distance table: split detection and collision detection.

Both tests read only the table; neither reconstructs sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from blindfold.errors import DuplicateNodeError, ForestStructureError
from blindfold.forest import ForestState

INF = math.inf

# Float noise below this counts as an exact tie at the f/2 margins.
MARGIN_SLACK = 1e-9


class PairDistances(Protocol):
    def __getitem__(self, pair: tuple[int, int]) -> float: ...


def _four_point(
    table: PairDistances,
    a1: tuple[int, int],
    b1: tuple[int, int],
    c1: tuple[int, int],
    d1: tuple[int, int],
) -> float:
    """``½(D(a) + D(b) - D(c) - D(d))``, ``inf`` if any term is ``inf``."""
    terms = (table[a1], table[b1], table[c1], table[d1])
    if INF in terms:
        return INF
    return 0.5 * (terms[0] + terms[1] - terms[2] - terms[3])


def is_split(
    pair1: tuple[int, int],
    pair2: tuple[int, int],
    table: PairDistances,
    f: float,
) -> bool:
    """True unless the internal length of ``v1 w1 | v2 w2`` is below ``f / 2``."""
    v1, w1 = pair1
    v2, w2 = pair2
    if len({v1, w1, v2, w2}) != 4:
        raise DuplicateNodeError(f"Quartet {pair1}|{pair2} repeats a node.")
    nu = _four_point(table, (w1, w2), (v1, v2), (w1, v1), (w2, v2))
    return not nu < f / 2 - MARGIN_SLACK


@dataclass(frozen=True)
class CollisionVerdict:
    """Outcome of one collision test on the edge ``(u, v)``."""

    collides: bool
    u: int
    v: int
    nu: float

    def __bool__(self) -> bool:
        return self.collides


def collision_test(
    x0: int,
    v: int,
    w: int,
    u: int,
    h_uv: float,
    forest: ForestState,
    table: PairDistances,
    f: float,
) -> CollisionVerdict:
    """Does the subtree behind reference point *x0* enter the edge ``(u, v)``?

    ``ν`` is the internal length of ``x0 w | v1 v2`` with ``v1, v2`` the
    children of *v*; a collision is reported when ``h_uv - ν > f / 2``.
    An exact tie is not a collision.
    """
    if forest.parent(v) != u or forest.sister(v) != w:
        raise ForestStructureError(f"({u}, {v}) with sister {w} is not a forest edge.")
    v1, v2 = forest.child_pair(v)
    nu = _four_point(table, (v1, x0), (v2, w), (v1, v2), (x0, w))
    return CollisionVerdict(collides=h_uv - nu > f / 2 + MARGIN_SLACK, u=u, v=v, nu=nu)


def is_collision(
    x0: int,
    v: int,
    w: int,
    u: int,
    h_uv: float,
    forest: ForestState,
    table: PairDistances,
    f: float,
) -> bool:
    return collision_test(x0, v, w, u, h_uv, forest, table, f).collides
