"""Markov evolution on trees: CFN and Jukes–Cantor models.

Closed-form edge quantities (θ, flip probabilities, transition matrices),
the Δ-discretised random tree generator, the character matrix container
and the site simulator.  All randomness comes from :mod:`blindfold.streams`
so that results depend only on ``(tree, model, k, seed)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import expm

from blindfold.errors import (
    AlphabetMismatchError,
    EmptyLengthGridError,
    InvalidRegimeError,
    MatrixFormatError,
    NegativeLengthError,
    UnknownNodeError,
)
from blindfold.streams import (
    STREAM_EDGE,
    STREAM_EDGE_TARGET,
    STREAM_LENGTHS,
    STREAM_ROOT,
    STREAM_TOPOLOGY,
    sign_bits,
    stream,
)
from blindfold.treekit import PhyloTree, as_length, reroot

logger = logging.getLogger(__name__)

G_STAR = math.log(2) / 4
THETA_STAR = 2 ** -0.5
P_STAR = (math.sqrt(2) - 1) / math.sqrt(8)

_JC_LETTERS = "ACGT"


class ModelSpec(enum.Enum):
    """Substitution model: uniform root prior and symmetric rate matrix."""

    CFN = "CFN"
    JC = "JC"

    @property
    def n_states(self) -> int:
        return 2 if self is ModelSpec.CFN else 4

    @property
    def root_prior(self) -> np.ndarray:
        return np.full(self.n_states, 1.0 / self.n_states)

    @property
    def rate_matrix(self) -> np.ndarray:
        """Q with unit off-diagonal rates; CFN ``[[-1, 1], [1, -1]]``, JC ``1 - 4·I``."""
        s = self.n_states
        return np.ones((s, s)) - s * np.eye(s)

    @classmethod
    def parse(cls, text: str) -> ModelSpec:
        try:
            return cls(text.upper())
        except ValueError:
            raise AlphabetMismatchError(f"Unknown model {text!r}; expected CFN or JC.") from None


# -- closed forms ------------------------------------------------------------------

def _checked(d: Decimal | float) -> float:
    value = float(d)
    if value < 0:
        raise NegativeLengthError(f"Edge length must be non-negative, got {d}.")
    return value


def theta_of_d(d: Decimal | float) -> float:
    """Edge correlation ``e^{-2d}``."""
    return math.exp(-2.0 * _checked(d))


def p_of_d(model: ModelSpec, d: Decimal | float) -> float:
    """Probability of each specific change across an edge of length *d*.

    CFN: ``(1 - e^{-2d})/2``.  JC: ``(1 - e^{-4d})/4`` per target state.
    """
    value = _checked(d)
    if model is ModelSpec.CFN:
        return -math.expm1(-2.0 * value) / 2.0
    return -math.expm1(-4.0 * value) / 4.0


def transition_matrix(model: ModelSpec, d: Decimal | float) -> np.ndarray:
    """``exp(d·Q)``."""
    return expm(_checked(d) * model.rate_matrix)


def jc_class_transition_matrix(d: Decimal | float) -> np.ndarray:
    """Purine/pyrimidine class process induced by a JC edge of length *d*."""
    jc = transition_matrix(ModelSpec.JC, d)
    classes = (np.array([0, 2]), np.array([1, 3]))
    out = np.empty((2, 2))
    for i, src in enumerate(classes):
        for j, dst in enumerate(classes):
            out[i, j] = jc[src[0]][dst].sum()
    return out


# -- Δ-branch model trees --------------------------------------------------------------

@dataclass(frozen=True)
class DeltaBMSpec:
    """Random tree regime: n leaves, lengths on the Δ-grid inside [f, g].

    Parameters
    ----------
    n:
        Number of leaves (>= 2).
    f, g:
        Edge length bounds, ``0 < f <= g < g*``.
    delta:
        Discretisation step.  Unless *snap* is set, f and g must be multiples.
    snap:
        Round f up and g down to the grid instead of rejecting them.
    """

    n: int
    f: Decimal
    g: Decimal
    delta: Decimal
    snap: bool = False

    def __post_init__(self) -> None:
        for name in ("f", "g", "delta"):
            object.__setattr__(self, name, as_length(getattr(self, name)))
        if self.n < 2:
            raise InvalidRegimeError(f"Need at least 2 leaves, got n={self.n}.")
        if self.delta <= 0:
            raise InvalidRegimeError(f"Δ must be positive, got {self.delta}.")
        if not 0 < self.f <= self.g:
            raise InvalidRegimeError(f"Need 0 < f <= g, got f={self.f}, g={self.g}.")
        if float(self.g) >= G_STAR:
            raise InvalidRegimeError(f"g={self.g} is not below g*={G_STAR:.7f}.")
        if not self.snap:
            for name in ("f", "g"):
                if getattr(self, name) % self.delta != 0:
                    raise InvalidRegimeError(
                        f"{name}={getattr(self, name)} is not a multiple of Δ={self.delta}."
                    )

    def length_grid(self) -> list[Decimal]:
        """``{f, f+Δ, …, g}`` after snapping to multiples of Δ."""
        lo = (self.f / self.delta).to_integral_value(rounding=ROUND_CEILING)
        hi = (self.g / self.delta).to_integral_value(rounding=ROUND_FLOOR)
        if lo > hi:
            raise EmptyLengthGridError(
                f"No multiple of Δ={self.delta} lies in [{self.f}, {self.g}]."
            )
        return [self.delta * i for i in range(int(lo), int(hi) + 1)]


def random_delta_bm_tree(spec: DeltaBMSpec, seed: int) -> PhyloTree:
    """Uniform labelled unrooted binary topology with grid-valued lengths.

    Leaves ``3..n`` are attached in turn to a uniformly chosen existing edge;
    internal nodes are numbered ``n+1, n+2, …`` in creation order.
    """
    grid = spec.length_grid()
    rng = stream(seed, STREAM_TOPOLOGY)
    edges: list[tuple[int, int]] = [(1, 2)]
    next_id = spec.n + 1
    for leaf in range(3, spec.n + 1):
        i = int(rng.integers(len(edges)))
        a, b = edges[i]
        mid = next_id
        next_id += 1
        edges[i] = (a, mid)
        edges.append((mid, b))
        edges.append((mid, leaf))
    picks = stream(seed, STREAM_LENGTHS).integers(len(grid), size=len(edges))
    return PhyloTree.from_edges((a, b, grid[int(c)]) for (a, b), c in zip(edges, picks))


# -- character matrices ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CharacterMatrix:
    """Leaf sequences of common length k.

    ``values`` is an ``(n, k)`` int8 array: ±1 for CFN, codes 0..3 (A, C, G, T)
    for JC.  ``internal`` optionally holds simulated states of every node.
    """

    labels: tuple[int, ...]
    values: np.ndarray
    model: ModelSpec = ModelSpec.CFN
    internal: Mapping[int, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.int8)
        if values.ndim != 2 or values.shape[0] != len(self.labels):
            raise MatrixFormatError(
                f"Expected {len(self.labels)} rows, got array of shape {values.shape}."
            )
        if values.shape[1] < 1:
            raise MatrixFormatError("Sequences must have at least one site.")
        if len(set(self.labels)) != len(self.labels):
            raise MatrixFormatError(f"Duplicate labels in {self.labels}.")
        allowed = (-1, 1) if self.model is ModelSpec.CFN else (0, 1, 2, 3)
        if not np.isin(values, allowed).all():
            raise AlphabetMismatchError(f"Values outside the {self.model.value} alphabet.")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_rows", {label: i for i, label in enumerate(self.labels)})

    @property
    def k(self) -> int:
        return int(self.values.shape[1])

    @property
    def n(self) -> int:
        return len(self.labels)

    def sequence(self, label: int) -> np.ndarray:
        try:
            return self.values[self._rows[label]]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownNodeError(f"No sequence for leaf {label!r}.") from None

    def restrict(self, labels: Iterable[int]) -> CharacterMatrix:
        keep = tuple(labels)
        rows = [self._rows[label] for label in keep]  # type: ignore[attr-defined]
        return CharacterMatrix(keep, self.values[rows], self.model)

    def truncate(self, k: int) -> CharacterMatrix:
        """First *k* sites."""
        if not 1 <= k <= self.k:
            raise MatrixFormatError(f"Cannot truncate {self.k} sites to {k}.")
        return CharacterMatrix(self.labels, self.values[:, :k], self.model)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CharacterMatrix):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.model is other.model
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    # -- text format -----------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"k={self.k} alphabet={self.model.value}"]
        for label, row in zip(self.labels, self.values):
            lines.append(f"{label}\t{_encode(row, self.model)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> CharacterMatrix:
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise MatrixFormatError("Empty character matrix.")
        header = dict(
            part.split("=", 1) for part in lines[0].split() if "=" in part
        )
        try:
            k = int(header["k"])
            model = ModelSpec.parse(header["alphabet"])
        except (KeyError, ValueError):
            raise MatrixFormatError(f"Malformed header {lines[0]!r}.") from None
        labels: list[int] = []
        rows: list[np.ndarray] = []
        for lineno, line in enumerate(lines[1:], start=2):
            try:
                label_text, seq = line.split("\t")
                label = int(label_text)
            except ValueError:
                message = f"Line {lineno}: expected '<label>\\t<sequence>'."
                raise MatrixFormatError(message) from None
            if len(seq) != k:
                raise MatrixFormatError(
                    f"Line {lineno}: sequence has {len(seq)} sites, header says {k}."
                )
            labels.append(label)
            rows.append(_decode(seq, model, lineno))
        if not rows:
            raise MatrixFormatError("Character matrix has no sequences.")
        return cls(tuple(labels), np.vstack(rows), model)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path: str | Path) -> CharacterMatrix:
        return cls.from_text(Path(path).read_text())


_DECODE_CFN = np.full(256, -128, dtype=np.int16)
_DECODE_CFN[ord("+")] = 1
_DECODE_CFN[ord("-")] = -1
_DECODE_JC = np.full(256, -128, dtype=np.int16)
for _code, _letter in enumerate(_JC_LETTERS):
    _DECODE_JC[ord(_letter)] = _code
    _DECODE_JC[ord(_letter.lower())] = _code


def _encode(row: np.ndarray, model: ModelSpec) -> str:
    if model is ModelSpec.CFN:
        return np.where(row > 0, b"+", b"-").astype("S1").tobytes().decode("ascii")
    return np.array(list(_JC_LETTERS), dtype="S1")[row].tobytes().decode("ascii")


def _decode(seq: str, model: ModelSpec, lineno: int) -> np.ndarray:
    try:
        raw = np.frombuffer(seq.encode("ascii"), dtype=np.uint8)
    except UnicodeEncodeError:
        raise AlphabetMismatchError(f"Line {lineno}: non-ASCII symbol.") from None
    table = _DECODE_CFN if model is ModelSpec.CFN else _DECODE_JC
    out = table[raw]
    if (out == -128).any():
        raise AlphabetMismatchError(
            f"Line {lineno}: symbol outside the {model.value} alphabet."
        )
    return out.astype(np.int8)


# -- simulation --------------------------------------------------------------------------

def _default_root(tree: PhyloTree) -> int:
    return tree.internal_nodes[0] if tree.internal_nodes else tree.nodes[0]


def simulate(
    tree: PhyloTree,
    model: ModelSpec,
    k: int,
    seed: int,
    *,
    record_internal: bool = False,
) -> CharacterMatrix:
    """Draw *k* i.i.d. characters on *tree*.

    Unrooted trees are rooted at their smallest internal node.  The flips on
    the edge into node ``c`` come from the stream keyed ``(seed, edge, c)``.
    """
    if k < 1:
        raise MatrixFormatError(f"Need at least one site, got k={k}.")
    rooted = tree if tree.root is not None else reroot(tree, _default_root(tree))
    root = rooted.root
    assert root is not None
    if model is ModelSpec.CFN:
        root_states = sign_bits(seed, STREAM_ROOT, size=k)
    else:
        root_states = stream(seed, STREAM_ROOT).integers(0, 4, size=k, dtype=np.int8)
    states: dict[int, np.ndarray] = {root: root_states}
    frontier = [root]
    while frontier:
        node = frontier.pop()
        parent_states = states[node]
        for child in rooted.children(node):
            p = p_of_d(model, rooted.length(node, child))
            draws = stream(seed, STREAM_EDGE, child).random(k)
            if model is ModelSpec.CFN:
                states[child] = np.where(draws < p, -parent_states, parent_states).astype(np.int8)
            else:
                shift = stream(seed, STREAM_EDGE_TARGET, child).integers(1, 4, size=k)
                changed = ((parent_states + shift) % 4).astype(np.int8)
                states[child] = np.where(draws < 3 * p, changed, parent_states).astype(np.int8)
            frontier.append(child)
    labels = tuple(sorted(tree.leaves))
    logger.debug("simulated %d sites on %d leaves (seed=%d)", k, len(labels), seed)
    return CharacterMatrix(
        labels,
        np.vstack([states[label] for label in labels]),
        model,
        internal=states if record_internal else None,
    )


def jc_to_cfn_reduce(matrix: CharacterMatrix) -> CharacterMatrix:
    """Map A, G to +1 and C, T to -1."""
    if matrix.model is not ModelSpec.JC:
        raise AlphabetMismatchError("Class reduction needs a JC matrix.")
    values = np.where(matrix.values % 2 == 0, 1, -1).astype(np.int8)
    return CharacterMatrix(matrix.labels, values, ModelSpec.CFN)
