"""Experiment result store backed by a JSON file.

Trials arrive from worker threads in any order; the store keeps them keyed
by ``(n, k, seed)`` and always reports them sorted, so aggregates recompute
exactly from the persisted records whatever the thread count was.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable

from blindfold_lab.errors import UsageError

_FORMAT_VERSION = 1

TrialKey = tuple[int, int, int]


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one seeded reconstruction.

    Parameters
    ----------
    n, k, seed:
        Leaf count, sequence length and the seed behind tree and characters.
    success:
        Exact topology recovered (``rf == 0``).
    rf:
        Robinson–Foulds distance to the true tree; ``None`` if the run failed.
    iterations:
        Main-loop iterations used.
    wall_time:
        Seconds, only when timing was requested.
    error:
        Error code of a failed run.
    """

    n: int
    k: int
    seed: int
    success: bool
    rf: int | None
    iterations: int
    wall_time: float | None = None
    error: str | None = None

    @property
    def key(self) -> TrialKey:
        return (self.n, self.k, self.seed)

    @property
    def near_miss(self) -> bool:
        return self.rf is not None and 0 < self.rf <= 2

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if self.wall_time is None:
            del d["wall_time"]
        if self.error is None:
            del d["error"]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> TrialRecord:
        return cls(
            n=int(d["n"]),
            k=int(d["k"]),
            seed=int(d["seed"]),
            success=bool(d["success"]),
            rf=None if d.get("rf") is None else int(d["rf"]),
            iterations=int(d["iterations"]),
            wall_time=d.get("wall_time"),
            error=d.get("error"),
        )


def success_rate(records: Iterable[TrialRecord]) -> float:
    rows = list(records)
    if not rows:
        return 0.0
    return sum(r.success for r in rows) / len(rows)


class ResultStore:
    """Thread-safe trial records plus named summary entries.

    Parameters
    ----------
    name:
        Experiment name, written into the file.
    storage_path:
        JSON file used for persistence, rewritten atomically on every
        change.  If ``None``, the store is in-memory only.
    """

    def __init__(self, name: str, storage_path: str | Path | None = None) -> None:
        self.name = name
        self._storage_path = Path(storage_path) if storage_path else None
        self._records: dict[TrialKey, TrialRecord] = {}
        self._summary: dict[str, Any] = {}
        self._lock = threading.RLock()
        if self._storage_path and self._storage_path.exists():
            self._load()

    # -- records ---------------------------------------------------------------

    def add(self, record: TrialRecord) -> None:
        with self._lock:
            self._records[record.key] = record
            self._persist()

    def extend(self, records: Iterable[TrialRecord]) -> None:
        with self._lock:
            for record in records:
                self._records[record.key] = record
            self._persist()

    def get(self, n: int, k: int, seed: int) -> TrialRecord | None:
        with self._lock:
            return self._records.get((n, k, seed))

    def records(self, *, n: int | None = None, k: int | None = None) -> list[TrialRecord]:
        with self._lock:
            rows = [
                r for key, r in sorted(self._records.items())
                if (n is None or r.n == n) and (k is None or r.k == k)
            ]
        return rows

    def success_rate(self, n: int, k: int) -> float:
        return success_rate(self.records(n=n, k=k))

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    # -- summary ---------------------------------------------------------------

    def set_summary(self, key: str, value: Any) -> None:
        with self._lock:
            self._summary[key] = value
            self._persist()

    def summary(self) -> dict[str, Any]:
        with self._lock:
            return dict(self._summary)

    def aggregates(self) -> dict[str, Any]:
        """Success rate and near misses per ``(n, k)``, recomputed from the records."""
        groups: dict[tuple[int, int], list[TrialRecord]] = {}
        for record in self.records():
            groups.setdefault((record.n, record.k), []).append(record)
        return {
            f"{n}:{k}": {
                "n": n,
                "k": k,
                "trials": len(rows),
                "success_rate": success_rate(rows),
                "near_misses": sum(r.near_miss for r in rows),
            }
            for (n, k), rows in sorted(groups.items())
        }

    def to_dict(self) -> dict[str, Any]:
        with self._lock:
            return {
                "version": _FORMAT_VERSION,
                "name": self.name,
                "records": [r.to_dict() for _, r in sorted(self._records.items())],
                "summary": self._summary,
            }

    # -- persistence -----------------------------------------------------------

    def _persist(self) -> None:
        if self._storage_path is None:
            return
        self._storage_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self._storage_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        tmp.replace(self._storage_path)

    def _load(self) -> None:
        assert self._storage_path is not None
        data = json.loads(self._storage_path.read_text())
        if data.get("version") != _FORMAT_VERSION:
            raise UsageError(
                f"{self._storage_path} has format version {data.get('version')!r}, "
                f"expected {_FORMAT_VERSION}."
            )
        self.name = data.get("name", self.name)
        for d in data.get("records", []):
            record = TrialRecord.from_dict(d)
            self._records[record.key] = record
        self._summary = dict(data.get("summary", {}))
