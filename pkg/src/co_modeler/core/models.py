"""Domain types for a shared model-building project.

A project is fully described by immutable metadata (id, name, created_at)
plus the ordered event log; ``ProjectState`` is the materialized view that
``co_modeler.core.events`` rebuilds deterministically from any replay.
Deletions are tombstones so replicas converge and the log replays cleanly.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

MODEL_SCHEMA_VERSION = 1


def new_id() -> str:
    return uuid.uuid4().hex


@dataclass
class Label:
    """One class in the project ontology; id survives renames."""

    id: str
    name: str
    deleted: bool = False


@dataclass
class TrainingSample:
    id: str
    label_id: str
    image_ref: str  # sha256 of the stored image bytes
    author: str
    added_at: str
    added_seq: int
    deleted: bool = False


@dataclass
class ClassificationResult:
    """Confidence distribution over the model's labels.

    ``correct`` is only defined when the owning test sample has a live
    expected label; it is derived at view time, never stored.
    """

    distribution: dict[str, float]
    top_label_id: str
    top_confidence: float
    correct: Optional[bool] = None

    def to_payload(self) -> dict[str, Any]:
        return {
            "distribution": dict(self.distribution),
            "top_label_id": self.top_label_id,
            "top_confidence": self.top_confidence,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "ClassificationResult":
        return cls(
            distribution={k: float(v) for k, v in payload["distribution"].items()},
            top_label_id=payload["top_label_id"],
            top_confidence=float(payload["top_confidence"]),
        )


@dataclass
class TestSample:
    id: str
    image_ref: str
    author: str
    added_at: str
    added_seq: int
    expected_label_id: Optional[str] = None
    latest_result: Optional[ClassificationResult] = None
    latest_model_version: Optional[int] = None
    deleted: bool = False


@dataclass
class ModelVersion:
    """Trained classifier head: feature standardization stats + softmax weights."""

    version: int
    label_ids: list[str]
    mean: np.ndarray  # (D,)
    std: np.ndarray  # (D,), floored at 1e-8
    weights: np.ndarray  # (K, D)
    bias: np.ndarray  # (K,)
    trained_at: str
    train_sample_count: int
    learning_rate: float = 0.1
    epochs: int = 300
    l2_penalty: float = 1e-3
    lr_reductions: int = 0
    schema_version: int = MODEL_SCHEMA_VERSION

    @property
    def num_labels(self) -> int:
        return len(self.label_ids)

    def to_payload(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "version": self.version,
            "label_ids": list(self.label_ids),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "weights": [[float(v) for v in row] for row in self.weights],
            "bias": [float(v) for v in self.bias],
            "trained_at": self.trained_at,
            "train_sample_count": self.train_sample_count,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2_penalty": self.l2_penalty,
            "lr_reductions": self.lr_reductions,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "ModelVersion":
        return cls(
            version=int(payload["version"]),
            label_ids=list(payload["label_ids"]),
            mean=np.array(payload["mean"], dtype=np.float64),
            std=np.array(payload["std"], dtype=np.float64),
            weights=np.array(payload["weights"], dtype=np.float64),
            bias=np.array(payload["bias"], dtype=np.float64),
            trained_at=payload["trained_at"],
            train_sample_count=int(payload["train_sample_count"]),
            learning_rate=float(payload.get("learning_rate", 0.1)),
            epochs=int(payload.get("epochs", 300)),
            l2_penalty=float(payload.get("l2_penalty", 1e-3)),
            lr_reductions=int(payload.get("lr_reductions", 0)),
            schema_version=int(payload.get("schema_version", MODEL_SCHEMA_VERSION)),
        )


@dataclass
class EventRecord:
    """Server-ordered mutation of project state; the unit of synchronization."""

    seq: int
    project_id: str
    kind: str
    payload: dict[str, Any]
    author: str
    server_time: str

    def to_json(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "project_id": self.project_id,
            "kind": self.kind,
            "payload": self.payload,
            "author": self.author,
            "server_time": self.server_time,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "EventRecord":
        return cls(
            seq=int(data["seq"]),
            project_id=data["project_id"],
            kind=data["kind"],
            payload=data["payload"],
            author=data["author"],
            server_time=data["server_time"],
        )


@dataclass
class ProjectState:
    """Materialized project state; a pure function of metadata + event log."""

    id: str
    name: str
    created_at: str
    head_seq: int = 0
    labels: list[Label] = field(default_factory=list)
    samples: dict[str, TrainingSample] = field(default_factory=dict)
    test_samples: dict[str, TestSample] = field(default_factory=dict)
    current_model: Optional[ModelVersion] = None
    dedupe: dict[str, str] = field(default_factory=dict)  # dedupe_key -> sample id

    def label_by_id(self, label_id: str) -> Optional[Label]:
        for label in self.labels:
            if label.id == label_id:
                return label
        return None

    def label_by_name(self, name: str, live_only: bool = True) -> Optional[Label]:
        for label in self.labels:
            if label.name == name and not (live_only and label.deleted):
                return label
        return None

    def live_labels(self) -> list[Label]:
        return [label for label in self.labels if not label.deleted]

    def live_samples(self) -> list[TrainingSample]:
        return [s for s in self.samples.values() if not s.deleted]

    def live_test_samples(self) -> list[TestSample]:
        return [s for s in self.test_samples.values() if not s.deleted]

    def sample_correct(self, sample: TestSample) -> Optional[bool]:
        """Verdict under the latest model; undefined without a live expected label."""
        if sample.latest_result is None or sample.expected_label_id is None:
            return None
        expected = self.label_by_id(sample.expected_label_id)
        if expected is None or expected.deleted:
            return None
        return sample.latest_result.top_label_id == sample.expected_label_id


@dataclass
class DatasetReportRow:
    label_id: str
    name: str
    count: int


@dataclass
class DatasetReport:
    rows: list[DatasetReportRow]
    total: int
    imbalance_ratio: Optional[float]


def dataset_report(state: ProjectState) -> DatasetReport:
    """Per-label live sample counts; tombstoned labels and samples excluded."""
    live = state.live_labels()
    counts = {label.id: 0 for label in live}
    for sample in state.samples.values():
        if not sample.deleted and sample.label_id in counts:
            counts[sample.label_id] += 1
    rows = [DatasetReportRow(label.id, label.name, counts[label.id]) for label in live]
    total = sum(counts.values())
    ratio = None
    if len(rows) >= 2:
        lo = min(r.count for r in rows)
        hi = max(r.count for r in rows)
        if lo > 0:
            ratio = hi / lo
    return DatasetReport(rows=rows, total=total, imbalance_ratio=ratio)


def _state_doc(state: ProjectState) -> dict[str, Any]:
    def result_doc(result: Optional[ClassificationResult]) -> Optional[dict[str, Any]]:
        if result is None:
            return None
        return {
            "distribution": {k: result.distribution[k] for k in sorted(result.distribution)},
            "top_label_id": result.top_label_id,
            "top_confidence": result.top_confidence,
        }

    return {
        "id": state.id,
        "name": state.name,
        "created_at": state.created_at,
        "head_seq": state.head_seq,
        "labels": [
            {"id": l.id, "name": l.name, "deleted": l.deleted} for l in state.labels
        ],
        "samples": [
            {
                "id": s.id,
                "label_id": s.label_id,
                "image_ref": s.image_ref,
                "author": s.author,
                "added_at": s.added_at,
                "added_seq": s.added_seq,
                "deleted": s.deleted,
            }
            for s in sorted(state.samples.values(), key=lambda s: s.id)
        ],
        "test_samples": [
            {
                "id": s.id,
                "image_ref": s.image_ref,
                "author": s.author,
                "added_at": s.added_at,
                "added_seq": s.added_seq,
                "expected_label_id": s.expected_label_id,
                "latest_result": result_doc(s.latest_result),
                "latest_model_version": s.latest_model_version,
                "deleted": s.deleted,
            }
            for s in sorted(state.test_samples.values(), key=lambda s: s.id)
        ],
        "current_model": state.current_model.to_payload() if state.current_model else None,
        "dedupe": {k: state.dedupe[k] for k in sorted(state.dedupe)},
    }


def state_fingerprint(state: ProjectState) -> str:
    """Canonical hash of the full state; replicas in sync agree bit-for-bit.

    Floats survive JSON round trips exactly (shortest-repr encoding), so a
    replica built from pulled events hashes identically to the server.
    """
    doc = json.dumps(_state_doc(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()
