"""Core domain: events, tombstones, replay determinism, reports, archives."""

from __future__ import annotations

import hashlib
import json
import random

import pytest

from co_modeler.core import archive, events as ev
from co_modeler.core.models import dataset_report, state_fingerprint
from co_modeler.core.store import ProjectStore
from co_modeler.errors import (
    BlobCorruptError,
    BlobMissingError,
    ConflictError,
    DuplicateNameError,
    NotFoundError,
    ValidationFailure,
)
from co_modeler.sync import ProjectReplica

from synth import solid


def test_create_project_empty_initial_state(store):
    state = store.create_project("Fruit Salad")
    assert state.head_seq == 0
    assert state.labels == []
    assert state.current_model is None


def test_create_project_empty_name_rejected(store):
    with pytest.raises(ValidationFailure):
        store.create_project("")
    with pytest.raises(ValidationFailure):
        store.create_project("   ")


def test_create_project_duplicate_name_rejected(store):
    store.create_project("A")
    with pytest.raises(DuplicateNameError):
        store.create_project("A")


def test_label_added_gets_seq_one(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "Banana", "mom")
    state = store.get_state(project.id)
    assert state.head_seq == 1
    assert [l.name for l in state.live_labels()] == ["Banana"]
    assert label.id == state.labels[0].id


def test_label_rename_keeps_id_and_samples(store):
    project = store.create_project("p")
    banana = store.add_label(project.id, "Banana", "mom")
    sample, _ = store.add_sample(project.id, banana.id, solid((1, 2, 3)), "kid")
    store.rename_label(project.id, banana.id, "Plantain", "dad")
    state = store.get_state(project.id)
    assert state.label_by_id(banana.id).name == "Plantain"
    assert state.samples[sample.id].label_id == banana.id


def test_label_rename_collision_rejected(store):
    project = store.create_project("p")
    banana = store.add_label(project.id, "Banana", "a")
    store.add_label(project.id, "Orange", "a")
    with pytest.raises(DuplicateNameError):
        store.rename_label(project.id, banana.id, "Orange", "a")
    # renaming to its own current name is a no-op, not a collision
    store.rename_label(project.id, banana.id, "Banana", "a")


def test_deleted_label_name_reusable(store):
    project = store.create_project("p")
    banana = store.add_label(project.id, "Banana", "a")
    store.delete_label(project.id, banana.id, "a")
    other = store.add_label(project.id, "Banana", "a")
    assert other.id != banana.id


def test_sample_add_requires_live_label(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "Banana", "a")
    store.delete_label(project.id, label.id, "a")
    with pytest.raises(NotFoundError):
        store.add_sample(project.id, label.id, solid((5, 5, 5)), "a")
    with pytest.raises(NotFoundError):
        store.add_sample(project.id, "missing-label", solid((5, 5, 5)), "a")


def test_sample_delete_is_idempotent(store):
    """Replay-idempotency oracle: apply the delete twice, compare states."""
    project = store.create_project("p")
    label = store.add_label(project.id, "Banana", "a")
    sample, _ = store.add_sample(project.id, label.id, solid((9, 9, 9)), "a")
    store.delete_sample(project.id, sample.id, "a")
    head_once = store.get_state(project.id).head_seq
    store.delete_sample(project.id, sample.id, "a")  # accepted no-op
    state = store.get_state(project.id)
    assert state.head_seq == head_once + 1

    records = store.events_since(project.id, 0)
    once = ev.replay(state.id, state.name, state.created_at, records[:head_once])
    twice = ev.replay(state.id, state.name, state.created_at, records)
    twice.head_seq = once.head_seq  # the extra record is the only difference
    assert state_fingerprint(once) == state_fingerprint(twice)
    assert state.samples[sample.id].deleted is True


def test_delete_missing_sample_rejected(store):
    project = store.create_project("p")
    with pytest.raises(NotFoundError):
        store.delete_sample(project.id, "nope", "a")


def test_duplicate_event_ids_rejected(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "L", "a")
    with pytest.raises(ConflictError):
        store.apply(project.id, ev.LABEL_ADDED, {"label_id": label.id, "name": "M"}, "a")


def test_unknown_event_kind_rejected(store):
    project = store.create_project("p")
    with pytest.raises(ValidationFailure):
        store.apply(project.id, "Nonsense", {}, "a")


def test_expected_label_requires_live_entities(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "L", "a")
    ts = store.add_test_sample(project.id, solid((3, 3, 3)), "a")
    store.set_expected_label(project.id, ts.id, label.id, "a")
    store.delete_test_sample(project.id, ts.id, "a")
    with pytest.raises(ValidationFailure):
        store.set_expected_label(project.id, ts.id, label.id, "a")
    ts2 = store.add_test_sample(project.id, solid((4, 4, 4)), "a")
    store.delete_label(project.id, label.id, "a")
    with pytest.raises(NotFoundError):
        store.set_expected_label(project.id, ts2.id, label.id, "a")


def test_dedupe_key_returns_existing_sample(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "L", "a")
    first, created_first = store.add_sample(project.id, label.id, solid((7, 7, 7)), "a", "key-1")
    again, created_again = store.add_sample(project.id, label.id, solid((7, 7, 7)), "a", "key-1")
    assert created_first is True
    assert created_again is False
    assert first.id == again.id
    assert len(store.get_state(project.id).samples) == 1


def test_duplicate_image_content_allowed(store):
    """Same bytes, two sample ids: repeated photos are meaningful."""
    project = store.create_project("p")
    label = store.add_label(project.id, "L", "a")
    one, _ = store.add_sample(project.id, label.id, solid((8, 8, 8)), "a")
    two, _ = store.add_sample(project.id, label.id, solid((8, 8, 8)), "b")
    assert one.id != two.id
    assert one.image_ref == two.image_ref


# -- dataset report ---------------------------------------------------------------


def test_dataset_report_empty_project(store):
    project = store.create_project("p")
    report = store.dataset_report(project.id)
    assert report.rows == []
    assert report.total == 0
    assert report.imbalance_ratio is None


def test_dataset_report_counts_and_imbalance(store):
    """41 spaghetti vs 23 spoon, the class-imbalance moment's numbers."""
    project = store.create_project("p")
    spaghetti = store.add_label(project.id, "spaghetti", "a")
    spoon = store.add_label(project.id, "spoon", "a")
    blob = solid((200, 100, 50))
    for _ in range(41):
        store.add_sample(project.id, spaghetti.id, blob, "a")
    for _ in range(23):
        store.add_sample(project.id, spoon.id, blob, "a")
    report = store.dataset_report(project.id)
    counts = {row.name: row.count for row in report.rows}
    assert counts == {"spaghetti": 41, "spoon": 23}
    assert report.total == 64
    assert report.imbalance_ratio == pytest.approx(41 / 23)


def test_dataset_report_tombstone_arithmetic(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "L", "a")
    ids = [store.add_sample(project.id, label.id, solid((i, i, i)), "a")[0].id for i in range(3)]
    store.delete_sample(project.id, ids[0], "a")
    report = store.dataset_report(project.id)
    assert report.rows[0].count == 2
    assert report.total == 2


def test_dataset_report_matches_brute_force(store):
    rng = random.Random(4)
    project = store.create_project("p")
    labels = [store.add_label(project.id, f"L{i}", "a") for i in range(4)]
    blob = solid((1, 1, 1))
    live = []
    for _ in range(60):
        label = rng.choice(labels)
        sample, _ = store.add_sample(project.id, label.id, blob, "a")
        live.append(sample)
        if live and rng.random() < 0.3:
            victim = live.pop(rng.randrange(len(live)))
            store.delete_sample(project.id, victim.id, "a")
    state = store.get_state(project.id)
    brute = {
        label.id: sum(
            1 for s in state.samples.values() if not s.deleted and s.label_id == label.id
        )
        for label in state.live_labels()
    }
    report = dataset_report(state)
    assert {row.label_id: row.count for row in report.rows} == brute
    assert report.total == sum(brute.values())


# -- replay determinism / log shape -------------------------------------------------


def _random_mutations(store, project_id, rng, steps=80):
    blob_pool = [solid((c, 30, 60)) for c in (10, 90, 170, 250)]
    for _ in range(steps):
        state = store.get_state(project_id)
        action = rng.random()
        try:
            if action < 0.25 or not state.labels:
                store.add_label(project_id, f"L{rng.randrange(10_000)}", "a")
            elif action < 0.40:
                label = rng.choice(state.labels)
                store.rename_label(project_id, label.id, f"R{rng.randrange(10_000)}", "b")
            elif action < 0.50:
                store.delete_label(project_id, rng.choice(state.labels).id, "a")
            elif action < 0.75:
                live = state.live_labels()
                if live:
                    store.add_sample(project_id, rng.choice(live).id, rng.choice(blob_pool), "c")
            elif action < 0.85 and state.samples:
                store.delete_sample(project_id, rng.choice(list(state.samples)), "b")
            elif action < 0.95:
                store.add_test_sample(project_id, rng.choice(blob_pool), "c")
            elif state.test_samples:
                store.delete_test_sample(project_id, rng.choice(list(state.test_samples)), "a")
        except (ValidationFailure, NotFoundError, ConflictError):
            pass  # invalid drafts are rejected without touching the log


def test_event_replay_reproduces_live_state(store):
    project = store.create_project("p")
    _random_mutations(store, project.id, random.Random(99))
    state = store.get_state(project.id)
    records = store.events_since(project.id, 0)
    assert [r.seq for r in records] == list(range(1, state.head_seq + 1))
    replayed = ev.replay(state.id, state.name, state.created_at, records)
    assert state_fingerprint(replayed) == state_fingerprint(state)


def test_tombstones_never_revert(store):
    project = store.create_project("p")
    rng = random.Random(5)
    dead_samples: set[str] = set()
    dead_labels: set[str] = set()
    for _ in range(6):
        _random_mutations(store, project.id, rng, steps=15)
        state = store.get_state(project.id)
        for sample_id in dead_samples:
            assert state.samples[sample_id].deleted
        for label_id in dead_labels:
            assert state.label_by_id(label_id).deleted
        dead_samples = {s.id for s in state.samples.values() if s.deleted}
        dead_labels = {l.id for l in state.labels if l.deleted}


def test_store_reload_from_disk(tmp_path):
    store = ProjectStore(tmp_path / "data")
    project = store.create_project("persist")
    _random_mutations(store, project.id, random.Random(3), steps=40)
    fingerprint = state_fingerprint(store.get_state(project.id))

    reloaded = ProjectStore(tmp_path / "data")
    assert state_fingerprint(reloaded.get_state(project.id)) == fingerprint


# -- blob store -------------------------------------------------------------------


def test_blob_round_trip(store):
    data = solid((120, 10, 220))
    sha = store.blobs.put(data)
    assert sha == hashlib.sha256(data).hexdigest()
    assert store.blobs.get(sha) == data
    assert store.blobs.exists(sha)


def test_blob_tamper_detected(store):
    data = solid((1, 2, 3))
    sha = store.blobs.put(data)
    (store.blobs.root / sha).write_bytes(b"tampered")
    with pytest.raises(BlobCorruptError):
        store.blobs.get(sha)


def test_blob_missing(store):
    with pytest.raises(BlobMissingError):
        store.blobs.get("0" * 64)


def test_gc_keeps_referenced_blobs(store):
    project = store.create_project("p")
    label = store.add_label(project.id, "L", "a")
    sample, _ = store.add_sample(project.id, label.id, solid((50, 60, 70)), "a")
    store.delete_sample(project.id, sample.id, "a")  # tombstoned but still referenced
    orphan = store.blobs.put(b"\x89PNG\r\n\x1a\nnot really")
    removed = store.collect_garbage()
    assert removed == 1
    assert not store.blobs.exists(orphan)
    assert store.blobs.exists(sample.image_ref)


# -- export / import ---------------------------------------------------------------


def _small_project(store, n_samples=6):
    project = store.create_project("exportable")
    a = store.add_label(project.id, "A", "mom")
    b = store.add_label(project.id, "B", "dad")
    for i in range(n_samples // 2):
        store.add_sample(project.id, a.id, solid((250 - i, 10, 10)), "mom")
        store.add_sample(project.id, b.id, solid((10, 10, 250 - i)), "dad")
    store.add_test_sample(project.id, solid((100, 100, 100)), "kid")
    return project


def test_export_import_round_trip(store, tmp_path):
    project = _small_project(store)
    fingerprint = state_fingerprint(store.get_state(project.id))
    dest = tmp_path / "archive"
    archive.export_project(store, project.id, dest)
    assert (dest / "manifest.json").is_file()

    fresh = ProjectStore(tmp_path / "fresh")
    imported = archive.import_project(fresh, dest)
    assert imported.id == project.id
    assert imported.head_seq == store.get_state(project.id).head_seq
    assert state_fingerprint(fresh.get_state(project.id)) == fingerprint


def test_export_zip_round_trip(store, tmp_path):
    project = _small_project(store)
    data = archive.export_zip_bytes(store, project.id)
    fresh = ProjectStore(tmp_path / "fresh")
    imported = archive.import_zip_bytes(fresh, data)
    assert state_fingerprint(fresh.get_state(imported.id)) == state_fingerprint(
        store.get_state(project.id)
    )


def test_import_rejects_corrupted_blob(store, tmp_path):
    project = _small_project(store)
    dest = tmp_path / "archive"
    archive.export_project(store, project.id, dest)
    victim = next((dest / "blobs").iterdir())
    victim.write_bytes(b"corrupted bytes")

    fresh = ProjectStore(tmp_path / "fresh")
    with pytest.raises(ValidationFailure):
        archive.import_project(fresh, dest)


def test_import_rejects_missing_blob(store, tmp_path):
    project = _small_project(store)
    dest = tmp_path / "archive"
    archive.export_project(store, project.id, dest)
    next((dest / "blobs").iterdir()).unlink()

    fresh = ProjectStore(tmp_path / "fresh")
    with pytest.raises(BlobMissingError):
        archive.import_project(fresh, dest)


def test_import_rejects_existing_project(store, tmp_path):
    project = _small_project(store)
    dest = tmp_path / "archive"
    archive.export_project(store, project.id, dest)
    with pytest.raises(DuplicateNameError):
        archive.import_project(store, dest)


def test_export_manifest_counts_samples(store, tmp_path):
    """A 126-image project lists 126 samples, the paper-scale dataset size."""
    project = store.create_project("bulk")
    labels = [store.add_label(project.id, name, "a") for name in ("w", "x", "y", "z")]
    blob = solid((128, 64, 32))
    for i in range(126):
        store.add_sample(project.id, labels[i % 4].id, blob, "a")
    dest = tmp_path / "archive"
    archive.export_project(store, project.id, dest)
    manifest = json.loads((dest / "manifest.json").read_text("utf-8"))
    assert len(manifest["samples"]) == 126


def test_replica_matches_server_after_replay(store):
    project = store.create_project("p")
    _random_mutations(store, project.id, random.Random(12), steps=50)
    replica = ProjectReplica.for_project(store.get_state(project.id))
    replica.sync(store)
    assert replica.fingerprint() == state_fingerprint(store.get_state(project.id))
