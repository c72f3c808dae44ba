"""Tests for TrialRecord and ResultStore."""

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest

from blindfold_lab.errors import UsageError
from blindfold_lab.store import ResultStore, TrialRecord, success_rate


# -- fixtures ----------------------------------------------------------------

@pytest.fixture
def store() -> ResultStore:
    """In-memory store (no persistence)."""
    return ResultStore("test-run")


@pytest.fixture
def persisted_store(tmp_path: Path) -> ResultStore:
    """Store backed by a temp JSON file."""
    return ResultStore("test-run", storage_path=tmp_path / "trials.json")


def _record(seed: int, *, n: int = 8, k: int = 100, rf: int | None = 0) -> TrialRecord:
    return TrialRecord(n=n, k=k, seed=seed, success=rf == 0, rf=rf, iterations=3)


# -- records -----------------------------------------------------------------

def test_record_dict_drops_unset_fields() -> None:
    d = _record(1).to_dict()
    assert "wall_time" not in d and "error" not in d
    failed = TrialRecord(8, 100, 2, False, None, 0, error="NON_CONVERGENCE")
    assert TrialRecord.from_dict(failed.to_dict()) == failed


def test_near_miss() -> None:
    assert _record(1, rf=2).near_miss
    assert not _record(1, rf=4).near_miss
    assert not _record(1, rf=0).near_miss
    assert not _record(1, rf=None).near_miss


def test_success_rate() -> None:
    assert success_rate([]) == 0.0
    assert success_rate([_record(1), _record(2, rf=2)]) == 0.5


# -- store -------------------------------------------------------------------

def test_records_are_sorted_and_keyed(store: ResultStore) -> None:
    store.add(_record(3))
    store.add(_record(1, k=200))
    store.add(_record(1))
    assert [r.key for r in store.records()] == [(8, 100, 1), (8, 100, 3), (8, 200, 1)]
    assert len(store.records(k=200)) == 1
    assert store.get(8, 100, 3) == _record(3)
    assert store.get(8, 100, 9) is None


def test_same_key_replaces(store: ResultStore) -> None:
    store.add(_record(1, rf=4))
    store.add(_record(1))
    assert len(store) == 1
    assert store.success_rate(8, 100) == 1.0


def test_aggregates(store: ResultStore) -> None:
    store.extend([_record(1), _record(2, rf=2), _record(3, rf=None), _record(1, n=16)])
    agg = store.aggregates()
    assert set(agg) == {"8:100", "16:100"}
    assert agg["8:100"]["trials"] == 3
    assert agg["8:100"]["near_misses"] == 1
    assert agg["8:100"]["success_rate"] == pytest.approx(1 / 3)


def test_concurrent_extends(store: ResultStore) -> None:
    batches = [[_record(seed + 10 * b) for seed in range(10)] for b in range(8)]
    with ThreadPoolExecutor(max_workers=4) as pool:
        list(pool.map(store.extend, batches))
    assert len(store) == 80
    assert [r.seed for r in store.records()] == sorted(r.seed for r in store.records())


# -- persistence -------------------------------------------------------------

def test_persist_and_reload(tmp_path: Path, persisted_store: ResultStore) -> None:
    persisted_store.extend([_record(2), _record(1)])
    persisted_store.set_summary("scaling", {"slope": 1.5})
    again = ResultStore("other", storage_path=tmp_path / "trials.json")
    assert again.name == "test-run"
    assert again.records() == persisted_store.records()
    assert again.summary() == {"scaling": {"slope": 1.5}}


def test_file_is_sorted_json(tmp_path: Path, persisted_store: ResultStore) -> None:
    persisted_store.extend([_record(2), _record(1)])
    data = json.loads((tmp_path / "trials.json").read_text())
    assert data["version"] == 1
    assert [r["seed"] for r in data["records"]] == [1, 2]
    assert not (tmp_path / "trials.tmp").exists()


def test_version_mismatch(tmp_path: Path) -> None:
    path = tmp_path / "trials.json"
    path.write_text(json.dumps({"version": 99, "records": []}))
    with pytest.raises(UsageError):
        ResultStore("x", storage_path=path)
