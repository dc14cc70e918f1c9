"""Event kinds, draft validation, and the pure state reducer.

Every mutation flows through an ``EventRecord``. Validation happens once, at
append time, against the current state; the reducer itself is total and
deterministic so any client can replay a pulled log without server help.
Events are self-contained: ``ModelTrained`` carries the full model payload
and the re-classification results, so replay never touches image bytes.
"""

from __future__ import annotations

from typing import Any, Callable, Iterable, Optional

from ..errors import (
    ConflictError,
    DuplicateNameError,
    DedupeKeyConflictError,
    NotFoundError,
    ValidationFailure,
)
from .models import (
    ClassificationResult,
    EventRecord,
    Label,
    ModelVersion,
    ProjectState,
    TestSample,
    TrainingSample,
)

LABEL_ADDED = "LabelAdded"
LABEL_RENAMED = "LabelRenamed"
LABEL_DELETED = "LabelDeleted"
SAMPLE_ADDED = "SampleAdded"
SAMPLE_DELETED = "SampleDeleted"
TEST_SAMPLE_ADDED = "TestSampleAdded"
TEST_SAMPLE_DELETED = "TestSampleDeleted"
EXPECTED_LABEL_SET = "ExpectedLabelSet"
MODEL_TRAINED = "ModelTrained"

ALL_KINDS = frozenset(
    {
        LABEL_ADDED,
        LABEL_RENAMED,
        LABEL_DELETED,
        SAMPLE_ADDED,
        SAMPLE_DELETED,
        TEST_SAMPLE_ADDED,
        TEST_SAMPLE_DELETED,
        EXPECTED_LABEL_SET,
        MODEL_TRAINED,
    }
)


def _require(payload: dict[str, Any], *keys: str) -> None:
    for key in keys:
        if key not in payload or payload[key] is None:
            raise ValidationFailure(f"payload missing required field {key!r}")


def validate_draft(
    state: ProjectState,
    kind: str,
    payload: dict[str, Any],
    blob_exists: Optional[Callable[[str], bool]] = None,
) -> None:
    """Reject a draft that references missing or tombstoned entities.

    Raises on any violation; a draft that passes here is guaranteed to apply
    cleanly. Deleting an already-deleted entity is accepted (idempotent
    no-op) so offline clients can resubmit safely.
    """
    if kind not in ALL_KINDS:
        raise ValidationFailure(f"unknown event kind {kind!r}")

    if kind == LABEL_ADDED:
        _require(payload, "label_id", "name")
        name = payload["name"]
        if not isinstance(name, str) or not name.strip():
            raise ValidationFailure("label name must be non-empty")
        if state.label_by_id(payload["label_id"]) is not None:
            raise ConflictError(f"label id {payload['label_id']} already exists")
        if state.label_by_name(name) is not None:
            raise DuplicateNameError(f"a live label named {name!r} already exists")

    elif kind == LABEL_RENAMED:
        _require(payload, "label_id", "name")
        label = state.label_by_id(payload["label_id"])
        if label is None:
            raise NotFoundError(f"label {payload['label_id']} does not exist")
        if label.deleted:
            raise ValidationFailure("cannot rename a deleted label")
        name = payload["name"]
        if not isinstance(name, str) or not name.strip():
            raise ValidationFailure("label name must be non-empty")
        existing = state.label_by_name(name)
        if existing is not None and existing.id != label.id:
            raise DuplicateNameError(f"a live label named {name!r} already exists")

    elif kind == LABEL_DELETED:
        _require(payload, "label_id")
        if state.label_by_id(payload["label_id"]) is None:
            raise NotFoundError(f"label {payload['label_id']} does not exist")

    elif kind == SAMPLE_ADDED:
        _require(payload, "sample_id", "label_id", "image_sha256")
        if payload["sample_id"] in state.samples:
            raise ConflictError(f"sample id {payload['sample_id']} already exists")
        label = state.label_by_id(payload["label_id"])
        if label is None or label.deleted:
            raise NotFoundError(f"label {payload['label_id']} is not a live label")
        if blob_exists is not None and not blob_exists(payload["image_sha256"]):
            raise ValidationFailure(f"no stored blob for {payload['image_sha256']}")
        dedupe_key = payload.get("dedupe_key")
        if dedupe_key is not None and dedupe_key in state.dedupe:
            raise DedupeKeyConflictError(f"dedupe key {dedupe_key!r} already used")

    elif kind == SAMPLE_DELETED:
        _require(payload, "sample_id")
        if payload["sample_id"] not in state.samples:
            raise NotFoundError(f"sample {payload['sample_id']} does not exist")

    elif kind == TEST_SAMPLE_ADDED:
        _require(payload, "sample_id", "image_sha256")
        if payload["sample_id"] in state.test_samples:
            raise ConflictError(f"test sample id {payload['sample_id']} already exists")
        if blob_exists is not None and not blob_exists(payload["image_sha256"]):
            raise ValidationFailure(f"no stored blob for {payload['image_sha256']}")
        if (payload.get("result") is None) != (payload.get("model_version") is None):
            raise ValidationFailure("result and model_version must be set together")

    elif kind == TEST_SAMPLE_DELETED:
        _require(payload, "sample_id")
        if payload["sample_id"] not in state.test_samples:
            raise NotFoundError(f"test sample {payload['sample_id']} does not exist")

    elif kind == EXPECTED_LABEL_SET:
        _require(payload, "sample_id")
        sample = state.test_samples.get(payload["sample_id"])
        if sample is None:
            raise NotFoundError(f"test sample {payload['sample_id']} does not exist")
        if sample.deleted:
            raise ValidationFailure("cannot set expected label on a deleted test sample")
        expected = payload.get("expected_label_id")
        if expected is not None:
            label = state.label_by_id(expected)
            if label is None or label.deleted:
                raise NotFoundError(f"label {expected} is not a live label")

    elif kind == MODEL_TRAINED:
        _require(payload, "model")
        model = payload["model"]
        _require(model, "version", "label_ids", "mean", "std", "weights", "bias")
        if len(model["label_ids"]) < 2:
            raise ValidationFailure("a model needs at least 2 labels")
        expected_version = (state.current_model.version + 1) if state.current_model else 1
        if int(model["version"]) != expected_version:
            raise ConflictError(
                f"model version {model['version']} is not the next version "
                f"({expected_version})"
            )
        for label_id in model["label_ids"]:
            if state.label_by_id(label_id) is None:
                raise NotFoundError(f"model references unknown label {label_id}")
        for entry in payload.get("reclassified", []):
            if entry["sample_id"] not in state.test_samples:
                raise NotFoundError(
                    f"reclassification references unknown test sample {entry['sample_id']}"
                )


def apply_to_state(state: ProjectState, record: EventRecord) -> None:
    """Fold one validated record into the state. Total and deterministic."""
    kind, payload = record.kind, record.payload

    if kind == LABEL_ADDED:
        state.labels.append(Label(id=payload["label_id"], name=payload["name"]))

    elif kind == LABEL_RENAMED:
        label = state.label_by_id(payload["label_id"])
        assert label is not None
        label.name = payload["name"]

    elif kind == LABEL_DELETED:
        label = state.label_by_id(payload["label_id"])
        assert label is not None
        label.deleted = True

    elif kind == SAMPLE_ADDED:
        sample = TrainingSample(
            id=payload["sample_id"],
            label_id=payload["label_id"],
            image_ref=payload["image_sha256"],
            author=record.author,
            added_at=record.server_time,
            added_seq=record.seq,
        )
        state.samples[sample.id] = sample
        dedupe_key = payload.get("dedupe_key")
        if dedupe_key is not None:
            state.dedupe[dedupe_key] = sample.id

    elif kind == SAMPLE_DELETED:
        state.samples[payload["sample_id"]].deleted = True

    elif kind == TEST_SAMPLE_ADDED:
        result = payload.get("result")
        sample = TestSample(
            id=payload["sample_id"],
            image_ref=payload["image_sha256"],
            author=record.author,
            added_at=record.server_time,
            added_seq=record.seq,
            latest_result=ClassificationResult.from_payload(result) if result else None,
            latest_model_version=(
                int(payload["model_version"]) if payload.get("model_version") is not None else None
            ),
        )
        state.test_samples[sample.id] = sample

    elif kind == TEST_SAMPLE_DELETED:
        state.test_samples[payload["sample_id"]].deleted = True

    elif kind == EXPECTED_LABEL_SET:
        sample = state.test_samples[payload["sample_id"]]
        sample.expected_label_id = payload.get("expected_label_id")

    elif kind == MODEL_TRAINED:
        model = ModelVersion.from_payload(payload["model"])
        state.current_model = model
        for entry in payload.get("reclassified", []):
            sample = state.test_samples.get(entry["sample_id"])
            if sample is None or sample.deleted:
                continue
            sample.latest_result = ClassificationResult.from_payload(entry["result"])
            sample.latest_model_version = model.version

    else:  # pragma: no cover - validate_draft rejects unknown kinds
        raise ValidationFailure(f"unknown event kind {kind!r}")

    state.head_seq = record.seq


def replay(
    project_id: str,
    name: str,
    created_at: str,
    records: Iterable[EventRecord],
) -> ProjectState:
    """Rebuild state from scratch; records must be contiguous from seq 1."""
    state = ProjectState(id=project_id, name=name, created_at=created_at)
    for record in records:
        if record.seq != state.head_seq + 1:
            raise ValidationFailure(
                f"event log gap: expected seq {state.head_seq + 1}, got {record.seq}"
            )
        apply_to_state(state, record)
    return state
