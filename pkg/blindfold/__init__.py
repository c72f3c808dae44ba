"""Blindfold: distance-based phylogeny reconstruction from leaf sequences."""

from blindfold.ancestral import MajorityConfig, anc_estimate, choose_level_parameter
from blindfold.audit import ForestAuditor
from blindfold.bcp import BCPResult, MetricMode, PhaseRecord, RunOptions, bcp_run
from blindfold.distances import DistanceTable, dist_hat, int_hat, round_to_delta
from blindfold.errors import (
    AlphabetMismatchError,
    AuditViolationError,
    BlindfoldError,
    DuplicateNodeError,
    EmptyLengthGridError,
    EmptyNodeSetError,
    ForestStructureError,
    InvalidRegimeError,
    InvalidTreeError,
    LeafSetMismatchError,
    MatrixFormatError,
    MissingBranchLengthError,
    MissingEntryError,
    NegativeLengthError,
    NewickSyntaxError,
    NoAmplificationError,
    NonBinaryTreeError,
    NonConvergenceError,
    NotARootError,
    SequenceLengthMismatchError,
    UnknownNodeError,
)
from blindfold.evolve import (
    G_STAR,
    P_STAR,
    THETA_STAR,
    CharacterMatrix,
    DeltaBMSpec,
    ModelSpec,
    jc_to_cfn_reduce,
    random_delta_bm_tree,
    simulate,
)
from blindfold.forest import ForestState
from blindfold.params import AlgoParams, CalibrationTable, derive_params
from blindfold.quartets import is_collision, is_split
from blindfold.treekit import PhyloTree, newick_parse, newick_write, rf_distance

__all__ = [
    "bcp_run",
    "BCPResult",
    "PhaseRecord",
    "RunOptions",
    "MetricMode",
    "AlgoParams",
    "CalibrationTable",
    "derive_params",
    "ForestState",
    "ForestAuditor",
    "DistanceTable",
    "dist_hat",
    "int_hat",
    "round_to_delta",
    "is_split",
    "is_collision",
    "MajorityConfig",
    "anc_estimate",
    "choose_level_parameter",
    "PhyloTree",
    "newick_parse",
    "newick_write",
    "rf_distance",
    "CharacterMatrix",
    "DeltaBMSpec",
    "ModelSpec",
    "random_delta_bm_tree",
    "simulate",
    "jc_to_cfn_reduce",
    "G_STAR",
    "THETA_STAR",
    "P_STAR",
    "BlindfoldError",
    "NewickSyntaxError",
    "NonBinaryTreeError",
    "MissingBranchLengthError",
    "InvalidTreeError",
    "UnknownNodeError",
    "EmptyNodeSetError",
    "DuplicateNodeError",
    "LeafSetMismatchError",
    "NegativeLengthError",
    "EmptyLengthGridError",
    "AlphabetMismatchError",
    "SequenceLengthMismatchError",
    "MatrixFormatError",
    "NoAmplificationError",
    "InvalidRegimeError",
    "MissingEntryError",
    "NotARootError",
    "ForestStructureError",
    "NonConvergenceError",
    "AuditViolationError",
]
