"""Error types for the blindfold reconstruction library."""

from __future__ import annotations


class BlindfoldError(Exception):
    """Base error for all reconstruction operations."""

    code: str

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(message)

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message}


# -- trees ---------------------------------------------------------------------

class NewickSyntaxError(BlindfoldError):
    code = "NEWICK_SYNTAX"

    def __init__(self, message: str, offset: int) -> None:
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})")

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["offset"] = self.offset
        return d


class NonBinaryTreeError(BlindfoldError):
    code = "NON_BINARY_TREE"


class MissingBranchLengthError(BlindfoldError):
    code = "MISSING_BRANCH_LENGTH"


class InvalidTreeError(BlindfoldError):
    code = "INVALID_TREE"


class UnknownNodeError(BlindfoldError):
    code = "UNKNOWN_NODE"


class EmptyNodeSetError(BlindfoldError):
    code = "EMPTY_NODE_SET"


class DuplicateNodeError(BlindfoldError):
    code = "DUPLICATE_NODE"


class LeafSetMismatchError(BlindfoldError):
    code = "LEAF_SET_MISMATCH"


# -- evolution and sequences ---------------------------------------------------

class NegativeLengthError(BlindfoldError):
    code = "NEGATIVE_LENGTH"


class EmptyLengthGridError(BlindfoldError):
    code = "EMPTY_LENGTH_GRID"


class AlphabetMismatchError(BlindfoldError):
    code = "ALPHABET_MISMATCH"


class SequenceLengthMismatchError(BlindfoldError):
    code = "SEQUENCE_LENGTH_MISMATCH"


class MatrixFormatError(BlindfoldError):
    code = "MATRIX_FORMAT"


# -- parameters ----------------------------------------------------------------

class NoAmplificationError(BlindfoldError):
    code = "NO_AMPLIFICATION"


class InvalidRegimeError(BlindfoldError):
    code = "INVALID_REGIME"


# -- forest and main loop ------------------------------------------------------

class MissingEntryError(BlindfoldError):
    code = "MISSING_ENTRY"


class NotARootError(BlindfoldError):
    code = "NOT_A_ROOT"


class ForestStructureError(BlindfoldError):
    code = "FOREST_STRUCTURE"


class NonConvergenceError(BlindfoldError):
    code = "NON_CONVERGENCE"


class AuditViolationError(BlindfoldError):
    code = "AUDIT_VIOLATION"

    def __init__(self, claim: str, message: str) -> None:
        self.claim = claim
        super().__init__(f"[{claim}] {message}")

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["claim"] = self.claim
        return d
