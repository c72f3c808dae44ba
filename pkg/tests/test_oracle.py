"""Tests for the enumeration oracles and the closed-form checks."""

import pytest

from blindfold.evolve import ModelSpec, theta_of_d
from blindfold.treekit import PhyloTree
from blindfold_lab.errors import OracleTooLargeError
from blindfold_lab.oracle import (
    OracleCheck,
    brute_force_maj_correlation,
    leaf_correlation,
    monotonicity_probe,
    oracle_check,
    oracle_enumerate_small,
)
from blindfold_lab.scenarios import balanced_tree

CHERRY = PhyloTree.from_edges([(3, 1, "0.1"), (3, 2, "0.2")])


def test_oracle_check_passes() -> None:
    checks = oracle_check()
    assert checks
    assert [c.name for c in checks if not c.ok] == []
    assert {"theta(g*)", "p_cfn(g*)", "beta-fixed-point"} <= {c.name for c in checks}


def test_oracle_check_other_regime() -> None:
    assert all(c.ok for c in oracle_check(g=0.08, levels=2))


def test_check_reports_error() -> None:
    check = OracleCheck("x", 1.0, 1.5)
    assert not check.ok
    assert check.to_dict()["error"] == 0.5


@pytest.mark.parametrize("model", list(ModelSpec))
def test_leaf_law_sums_to_one(model: ModelSpec) -> None:
    law = oracle_enumerate_small(CHERRY, model)
    assert law.labels == (1, 2)
    assert law.total() == pytest.approx(1.0, abs=1e-12)
    assert len(law.probs) == model.n_states ** 2


def test_leaf_marginals_are_uniform() -> None:
    law = oracle_enumerate_small(CHERRY, ModelSpec.JC)
    assert law.probability({1: 2}) == pytest.approx(0.25, abs=1e-12)


def test_cfn_leaf_correlation() -> None:
    law = oracle_enumerate_small(CHERRY, ModelSpec.CFN)
    assert leaf_correlation(law, 1, 2) == pytest.approx(theta_of_d(0.3), abs=1e-12)


def test_enumeration_refuses_large_trees() -> None:
    with pytest.raises(OracleTooLargeError):
        oracle_enumerate_small(balanced_tree(5, "0.1"), ModelSpec.CFN)


def test_brute_force_majority_overrides() -> None:
    value = brute_force_maj_correlation(1, 0.8, edge_thetas={2: 0.5, 3: 0.9})
    assert value == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(OracleTooLargeError):
        brute_force_maj_correlation(5, 0.8)


def test_monotonicity_probe_sorts_grid() -> None:
    sweep = monotonicity_probe(2, 0.8, [1.0, 0.0, 0.5])
    assert sweep.etas == (0.0, 0.5, 1.0)
    assert sweep.values[0] == pytest.approx(0.0, abs=1e-12)
    assert sweep.monotone
