"""Dataset registry and per-dataset privacy-budget accounting.

Query costs compose sequentially within a dataset, so the ledger is the
serialization point: check-and-debit happens atomically under one lock,
and the debit lands before any computation runs.  A crashed query still
consumes budget; disclosure is never under-counted.

Every mutation is appended to a JSONL journal and replayed on startup so
budget state survives restarts.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..survey import SurveySample

__all__ = [
    "LedgerError",
    "UnknownDatasetError",
    "BudgetExceededError",
    "QueryLogEntry",
    "RegisteredDataset",
    "DatasetStore",
]


class LedgerError(Exception):
    error_code = "LEDGER_ERROR"


class UnknownDatasetError(LedgerError):
    error_code = "UNKNOWN_DATASET"


class BudgetExceededError(LedgerError):
    error_code = "BUDGET_EXCEEDED"


@dataclass(frozen=True)
class QueryLogEntry:
    query_id: str
    epsilon: float
    timestamp: str


@dataclass
class RegisteredDataset:
    dataset_id: str
    sample: SurveySample
    total_epsilon: float
    created_at: str
    log: list[QueryLogEntry] = field(default_factory=list)

    @property
    def spent(self) -> float:
        return float(sum(entry.epsilon for entry in self.log))

    @property
    def remaining(self) -> float:
        return self.total_epsilon - self.spent

    @property
    def variables(self) -> dict[str, np.ndarray]:
        return {"x": self.sample.x}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class DatasetStore:
    def __init__(self, journal_path: str | Path | None = None):
        self._lock = threading.Lock()
        self._datasets: dict[str, RegisteredDataset] = {}
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal = None
        if self._journal_path is not None:
            if self._journal_path.exists():
                self._replay()
            self._journal_path.parent.mkdir(parents=True, exist_ok=True)
            self._journal = open(self._journal_path, "a")

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None

    def _append(self, event: dict) -> None:
        if self._journal is not None:
            self._journal.write(json.dumps(event) + "\n")
            self._journal.flush()

    def _replay(self) -> None:
        for line in self._journal_path.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "register":
                sample = SurveySample(
                    ids=np.asarray(event["ids"], dtype=np.int64),
                    x=np.asarray(event["x"], dtype=float),
                    pi=np.asarray(event["pi"], dtype=float),
                    N=event["N"],
                )
                self._datasets[event["dataset_id"]] = RegisteredDataset(
                    dataset_id=event["dataset_id"],
                    sample=sample,
                    total_epsilon=event["total_epsilon"],
                    created_at=event["created_at"],
                )
            elif event["event"] == "debit":
                ds = self._datasets[event["dataset_id"]]
                ds.log.append(
                    QueryLogEntry(
                        query_id=event["query_id"],
                        epsilon=event["epsilon"],
                        timestamp=event["timestamp"],
                    )
                )

    def register(self, sample: SurveySample, total_epsilon: float) -> str:
        if total_epsilon <= 0:
            raise ValueError("total_epsilon must be positive")
        dataset_id = uuid.uuid4().hex
        created_at = _now()
        with self._lock:
            self._datasets[dataset_id] = RegisteredDataset(
                dataset_id=dataset_id,
                sample=sample,
                total_epsilon=total_epsilon,
                created_at=created_at,
            )
            self._append(
                {
                    "event": "register",
                    "dataset_id": dataset_id,
                    "created_at": created_at,
                    "total_epsilon": total_epsilon,
                    "N": sample.N,
                    "ids": [int(v) for v in sample.ids],
                    "x": [float(v) for v in sample.x],
                    "pi": [float(v) for v in sample.pi],
                }
            )
        return dataset_id

    def get(self, dataset_id: str) -> RegisteredDataset:
        with self._lock:
            try:
                return self._datasets[dataset_id]
            except KeyError:
                raise UnknownDatasetError(f"no dataset {dataset_id!r}") from None

    def debit(self, dataset_id: str, epsilon: float) -> tuple[str, float, float]:
        """Atomically spend epsilon; returns (query_id, spent, remaining).
        Rejected debits leave the ledger untouched."""
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        with self._lock:
            try:
                ds = self._datasets[dataset_id]
            except KeyError:
                raise UnknownDatasetError(f"no dataset {dataset_id!r}") from None
            if ds.spent + epsilon > ds.total_epsilon:
                raise BudgetExceededError(
                    f"query needs epsilon={epsilon} but only {ds.remaining} remains"
                )
            entry = QueryLogEntry(
                query_id=uuid.uuid4().hex, epsilon=epsilon, timestamp=_now()
            )
            ds.log.append(entry)
            self._append(
                {
                    "event": "debit",
                    "dataset_id": dataset_id,
                    "query_id": entry.query_id,
                    "epsilon": entry.epsilon,
                    "timestamp": entry.timestamp,
                }
            )
            return entry.query_id, ds.spent, ds.remaining

    def status(self, dataset_id: str) -> dict:
        with self._lock:
            try:
                ds = self._datasets[dataset_id]
            except KeyError:
                raise UnknownDatasetError(f"no dataset {dataset_id!r}") from None
            return {
                "total": ds.total_epsilon,
                "spent": ds.spent,
                "remaining": ds.remaining,
                "query_log": [
                    {
                        "query_id": e.query_id,
                        "epsilon": e.epsilon,
                        "timestamp": e.timestamp,
                    }
                    for e in ds.log
                ],
            }
