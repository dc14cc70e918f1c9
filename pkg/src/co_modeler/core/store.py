"""Persistent, concurrency-safe store for projects, events, and image blobs.

Layout under the data directory:

    blobs/<hex-sha256>              image bytes, content-addressed
    projects/<id>/meta.json         {id, name, created_at}
    projects/<id>/events.ndjson     one EventRecord per line, seq-contiguous
    projects/<id>/highscore.json    best Restaurant Frenzy total (optional)

``apply`` is the single serialization point per project: it validates the
draft, assigns the next seq, persists the record, folds it into the live
state, and wakes subscribers — all under the project lock. Reads outside the
lock see a consistent snapshot at some seq.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional

import numpy as np

from .. import features
from ..errors import (
    BlobCorruptError,
    BlobMissingError,
    CursorAheadError,
    DedupeKeyConflictError,
    DuplicateNameError,
    NotFoundError,
    ValidationFailure,
)
from . import events as ev
from .models import (
    DatasetReport,
    EventRecord,
    Label,
    ProjectState,
    TestSample,
    TrainingSample,
    dataset_report,
    new_id,
)

logger = logging.getLogger(__name__)


def utc_now_iso() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class BlobStore:
    """Content-addressed image storage; files named by sha256 hex digest."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, sha: str) -> Path:
        return self.root / sha

    def put(self, data: bytes) -> str:
        sha = hashlib.sha256(data).hexdigest()
        path = self._path(sha)
        if not path.exists():
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return sha

    def exists(self, sha: str) -> bool:
        return self._path(sha).is_file()

    def get(self, sha: str) -> bytes:
        path = self._path(sha)
        if not path.is_file():
            raise BlobMissingError(f"no blob {sha}")
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != sha:
            raise BlobCorruptError(f"blob {sha} does not hash to its name")
        return data

    def all_hashes(self) -> set[str]:
        return {p.name for p in self.root.iterdir() if p.is_file() and not p.name.endswith(".tmp")}

    def remove(self, sha: str) -> None:
        self._path(sha).unlink(missing_ok=True)


@dataclass
class LiveProject:
    state: ProjectState
    events: list[EventRecord]
    directory: Path
    lock: threading.RLock = field(default_factory=threading.RLock)
    cond: threading.Condition = field(init=False)
    training: bool = False

    def __post_init__(self) -> None:
        self.cond = threading.Condition(self.lock)


class ProjectStore:
    def __init__(self, data_dir: str | Path) -> None:
        self.data_dir = Path(data_dir)
        self.blobs = BlobStore(self.data_dir / "blobs")
        self._projects_dir = self.data_dir / "projects"
        self._projects_dir.mkdir(parents=True, exist_ok=True)
        self._registry_lock = threading.RLock()
        self._projects: dict[str, LiveProject] = {}
        self._feature_cache: dict[str, np.ndarray] = {}
        self._feature_cache_lock = threading.Lock()
        self._load_existing()

    # -- loading / registry -------------------------------------------------

    def _load_existing(self) -> None:
        for meta_path in sorted(self._projects_dir.glob("*/meta.json")):
            meta = json.loads(meta_path.read_text("utf-8"))
            directory = meta_path.parent
            records = self._read_log(directory / "events.ndjson")
            state = ev.replay(meta["id"], meta["name"], meta["created_at"], records)
            self._projects[meta["id"]] = LiveProject(state, records, directory)
        if self._projects:
            logger.info("loaded %d project(s) from %s", len(self._projects), self.data_dir)

    @staticmethod
    def _read_log(path: Path) -> list[EventRecord]:
        if not path.exists():
            return []
        records = []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(EventRecord.from_json(json.loads(line)))
        return records

    def create_project(self, name: str) -> ProjectState:
        if not name or not name.strip():
            raise ValidationFailure("project name must be non-empty")
        with self._registry_lock:
            for live in self._projects.values():
                if live.state.name == name:
                    raise DuplicateNameError(f"a project named {name!r} already exists")
            project_id = new_id()
            directory = self._projects_dir / project_id
            directory.mkdir(parents=True)
            meta = {"id": project_id, "name": name, "created_at": utc_now_iso()}
            (directory / "meta.json").write_text(json.dumps(meta), "utf-8")
            state = ProjectState(id=project_id, name=name, created_at=meta["created_at"])
            live = LiveProject(state, [], directory)
            self._projects[project_id] = live
            return state

    def register_project(self, meta: dict[str, Any], records: list[EventRecord]) -> ProjectState:
        """Install an imported project verbatim (id, log, and head_seq kept)."""
        with self._registry_lock:
            if meta["id"] in self._projects:
                raise DuplicateNameError(f"project id {meta['id']} already exists")
            for live in self._projects.values():
                if live.state.name == meta["name"]:
                    raise DuplicateNameError(f"a project named {meta['name']!r} already exists")
            state = ev.replay(meta["id"], meta["name"], meta["created_at"], records)
            directory = self._projects_dir / meta["id"]
            directory.mkdir(parents=True)
            (directory / "meta.json").write_text(
                json.dumps({"id": meta["id"], "name": meta["name"], "created_at": meta["created_at"]}),
                "utf-8",
            )
            with (directory / "events.ndjson").open("a", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record.to_json(), separators=(",", ":")) + "\n")
            live = LiveProject(state, list(records), directory)
            self._projects[meta["id"]] = live
            return state

    def projects(self) -> list[ProjectState]:
        with self._registry_lock:
            return [live.state for live in self._projects.values()]

    def get_live(self, project_id: str) -> LiveProject:
        with self._registry_lock:
            live = self._projects.get(project_id)
        if live is None:
            raise NotFoundError(f"no project {project_id}")
        return live

    def get_state(self, project_id: str) -> ProjectState:
        return self.get_live(project_id).state

    def resolve_project(self, ref: str) -> ProjectState:
        """Look up a project by id, falling back to exact name."""
        with self._registry_lock:
            live = self._projects.get(ref)
            if live is not None:
                return live.state
            for live in self._projects.values():
                if live.state.name == ref:
                    return live.state
        raise NotFoundError(f"no project {ref!r}")

    # -- the serialization point --------------------------------------------

    def apply(
        self,
        project_id: str,
        kind: str,
        payload: dict[str, Any],
        author: str,
    ) -> EventRecord:
        """Validate, persist, and apply one event; seq = head_seq + 1."""
        live = self.get_live(project_id)
        with live.lock:
            ev.validate_draft(live.state, kind, payload, blob_exists=self.blobs.exists)
            record = EventRecord(
                seq=live.state.head_seq + 1,
                project_id=project_id,
                kind=kind,
                payload=payload,
                author=author,
                server_time=utc_now_iso(),
            )
            with (live.directory / "events.ndjson").open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_json(), separators=(",", ":")) + "\n")
                fh.flush()
            ev.apply_to_state(live.state, record)
            live.events.append(record)
            live.cond.notify_all()
        return record

    # -- event access ---------------------------------------------------------

    def events_since(self, project_id: str, since: int) -> list[EventRecord]:
        live = self.get_live(project_id)
        with live.lock:
            if since > live.state.head_seq:
                raise CursorAheadError(
                    f"cursor {since} is ahead of head {live.state.head_seq}"
                )
            if since < 0:
                raise ValidationFailure("cursor must be >= 0")
            return live.events[since:]

    def subscribe(
        self,
        project_id: str,
        since: int,
        stop: Optional[threading.Event] = None,
        poll_interval: float = 0.1,
        idle_yield_s: Optional[float] = None,
    ) -> Iterator[Optional[EventRecord]]:
        """Yield every event after ``since`` exactly once, in seq order.

        Backfills history, then blocks for live events with no gap or
        duplicate at the transition. With ``idle_yield_s`` set, yields None
        after that many quiet seconds so stream endpoints can emit
        keepalives (and notice dead connections).
        """
        live = self.get_live(project_id)
        with live.lock:
            if since > live.state.head_seq:
                raise CursorAheadError(f"cursor {since} is ahead of head {live.state.head_seq}")
        cursor = since
        last_activity = time.monotonic()
        while stop is None or not stop.is_set():
            with live.lock:
                if live.state.head_seq <= cursor:
                    live.cond.wait(timeout=poll_interval)
                batch = live.events[cursor:]
            if not batch:
                if (
                    idle_yield_s is not None
                    and time.monotonic() - last_activity >= idle_yield_s
                ):
                    yield None
                    last_activity = time.monotonic()
                continue
            for record in batch:
                yield record
                cursor = record.seq
            last_activity = time.monotonic()

    # -- feature cache ---------------------------------------------------------

    def features_for(self, sha: str) -> np.ndarray:
        """Features for a stored blob, memoized by content hash."""
        with self._feature_cache_lock:
            cached = self._feature_cache.get(sha)
        if cached is not None:
            return cached
        vec = features.extract_features(self.blobs.get(sha))
        with self._feature_cache_lock:
            self._feature_cache[sha] = vec
        return vec

    def features_for_bytes(self, data: bytes) -> np.ndarray:
        """Features for transient bytes (live frames); cached but not stored."""
        sha = hashlib.sha256(data).hexdigest()
        with self._feature_cache_lock:
            cached = self._feature_cache.get(sha)
        if cached is not None:
            return cached
        vec = features.extract_features(data)
        with self._feature_cache_lock:
            self._feature_cache[sha] = vec
        return vec

    def clear_feature_cache(self) -> None:
        with self._feature_cache_lock:
            self._feature_cache.clear()

    # -- convenience mutations (draft builders) --------------------------------

    def add_label(self, project_id: str, name: str, author: str) -> Label:
        payload = {"label_id": new_id(), "name": name}
        self.apply(project_id, ev.LABEL_ADDED, payload, author)
        label = self.get_state(project_id).label_by_id(payload["label_id"])
        assert label is not None
        return label

    def rename_label(self, project_id: str, label_id: str, name: str, author: str) -> Label:
        self.apply(project_id, ev.LABEL_RENAMED, {"label_id": label_id, "name": name}, author)
        label = self.get_state(project_id).label_by_id(label_id)
        assert label is not None
        return label

    def delete_label(self, project_id: str, label_id: str, author: str) -> None:
        self.apply(project_id, ev.LABEL_DELETED, {"label_id": label_id}, author)

    def add_sample(
        self,
        project_id: str,
        label_id: str,
        image_bytes: bytes,
        author: str,
        dedupe_key: Optional[str] = None,
    ) -> tuple[TrainingSample, bool]:
        """Store the image and append SampleAdded; returns (sample, created).

        A repeated dedupe_key returns the existing sample instead of creating
        a duplicate, so clients can retry uploads safely.
        """
        features.decode_rgb(image_bytes)  # reject undecodable bytes before storing
        sha = self.blobs.put(image_bytes)
        payload = {
            "sample_id": new_id(),
            "label_id": label_id,
            "image_sha256": sha,
            "dedupe_key": dedupe_key,
        }
        try:
            self.apply(project_id, ev.SAMPLE_ADDED, payload, author)
        except DedupeKeyConflictError:
            state = self.get_state(project_id)
            existing = state.samples[state.dedupe[dedupe_key]]
            return existing, False
        return self.get_state(project_id).samples[payload["sample_id"]], True

    def delete_sample(self, project_id: str, sample_id: str, author: str) -> None:
        self.apply(project_id, ev.SAMPLE_DELETED, {"sample_id": sample_id}, author)

    def add_test_sample(
        self,
        project_id: str,
        image_bytes: bytes,
        author: str,
        result_payload: Optional[dict[str, Any]] = None,
        model_version: Optional[int] = None,
    ) -> TestSample:
        features.decode_rgb(image_bytes)
        sha = self.blobs.put(image_bytes)
        payload = {
            "sample_id": new_id(),
            "image_sha256": sha,
            "result": result_payload,
            "model_version": model_version,
        }
        self.apply(project_id, ev.TEST_SAMPLE_ADDED, payload, author)
        return self.get_state(project_id).test_samples[payload["sample_id"]]

    def delete_test_sample(self, project_id: str, sample_id: str, author: str) -> None:
        self.apply(project_id, ev.TEST_SAMPLE_DELETED, {"sample_id": sample_id}, author)

    def set_expected_label(
        self,
        project_id: str,
        sample_id: str,
        expected_label_id: Optional[str],
        author: str,
    ) -> TestSample:
        self.apply(
            project_id,
            ev.EXPECTED_LABEL_SET,
            {"sample_id": sample_id, "expected_label_id": expected_label_id},
            author,
        )
        return self.get_state(project_id).test_samples[sample_id]

    # -- reports / maintenance --------------------------------------------------

    def dataset_report(self, project_id: str) -> DatasetReport:
        live = self.get_live(project_id)
        with live.lock:
            return dataset_report(live.state)

    def referenced_hashes(self) -> set[str]:
        refs: set[str] = set()
        with self._registry_lock:
            projects = list(self._projects.values())
        for live in projects:
            with live.lock:
                for record in live.events:
                    sha = record.payload.get("image_sha256")
                    if sha:
                        refs.add(sha)
        return refs

    def collect_garbage(self) -> int:
        """Delete blobs referenced by no event in any project."""
        orphans = self.blobs.all_hashes() - self.referenced_hashes()
        for sha in orphans:
            self.blobs.remove(sha)
        return len(orphans)

    # -- high scores ---------------------------------------------------------

    def high_score(self, project_id: str) -> Optional[float]:
        path = self.get_live(project_id).directory / "highscore.json"
        if not path.exists():
            return None
        return float(json.loads(path.read_text("utf-8"))["best_total"])

    def record_score(self, project_id: str, total: float, session_id: str) -> float:
        """Keep the best total per project; returns the current high score."""
        live = self.get_live(project_id)
        path = live.directory / "highscore.json"
        with live.lock:
            best = self.high_score(project_id)
            if best is None or total > best:
                best = total
                path.write_text(
                    json.dumps({"best_total": best, "session_id": session_id, "at": utc_now_iso()}),
                    "utf-8",
                )
        return best
