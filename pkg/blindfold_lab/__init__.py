"""Blindfold lab: simulation, experiments and oracles around the reconstruction."""

from blindfold_lab.errors import (
    BudgetExceededError,
    LabError,
    OracleTooLargeError,
    UsageError,
)
from blindfold_lab.experiments import (
    Regime,
    calibrate,
    estimator_accuracy,
    minimal_k,
    reconstruct,
    run_trial,
    run_trials,
    scaling_experiment,
)
from blindfold_lab.oracle import (
    brute_force_maj_correlation,
    leaf_correlation,
    oracle_check,
    oracle_enumerate_small,
)
from blindfold_lab.scenarios import balanced_tree, fake_cherry_tree
from blindfold_lab.store import ResultStore, TrialRecord

__all__ = [
    "Regime",
    "reconstruct",
    "run_trial",
    "run_trials",
    "minimal_k",
    "scaling_experiment",
    "calibrate",
    "estimator_accuracy",
    "oracle_enumerate_small",
    "leaf_correlation",
    "brute_force_maj_correlation",
    "oracle_check",
    "balanced_tree",
    "fake_cherry_tree",
    "ResultStore",
    "TrialRecord",
    "LabError",
    "OracleTooLargeError",
    "BudgetExceededError",
    "UsageError",
]
