"""Multi-client synchronization over the project event log.

The server's append order is the total order; clients hold a cursor and
catch up with ``pull`` or follow live with ``subscribe``. ``ProjectReplica``
is the client-side materialization — it applies pulled records with the same
pure reducer the server uses, so a quiescent replica fingerprints
identically to the server.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterator, Optional

from .core import events as ev
from .core.models import EventRecord, ProjectState, state_fingerprint
from .core.store import ProjectStore
from .errors import ValidationFailure


@dataclass
class SyncCursor:
    project_id: str
    last_seq: int = 0


def pull(store: ProjectStore, cursor: SyncCursor) -> tuple[list[EventRecord], SyncCursor]:
    """Contiguous events after the cursor; empty when up to date."""
    records = store.events_since(cursor.project_id, cursor.last_seq)
    if not records:
        return [], cursor
    return records, SyncCursor(cursor.project_id, records[-1].seq)


def subscribe(
    store: ProjectStore,
    cursor: SyncCursor,
    stop: Optional[threading.Event] = None,
    poll_interval: float = 0.1,
) -> Iterator[EventRecord]:
    """History backfill followed by live delivery, exactly once, in seq order."""
    return store.subscribe(
        cursor.project_id, cursor.last_seq, stop=stop, poll_interval=poll_interval
    )


def fetch_blob(store: ProjectStore, sha: str) -> bytes:
    """Image bytes whose content hash equals the requested hash."""
    data = store.blobs.get(sha)  # raises BlobMissingError / BlobCorruptError
    return data


class ProjectReplica:
    """A client-side copy of project state, built purely from events."""

    def __init__(self, project_id: str, name: str, created_at: str) -> None:
        self.state = ProjectState(id=project_id, name=name, created_at=created_at)
        self.cursor = SyncCursor(project_id, 0)

    @classmethod
    def for_project(cls, state: ProjectState) -> "ProjectReplica":
        return cls(state.id, state.name, state.created_at)

    def apply_records(self, records: list[EventRecord]) -> None:
        for record in records:
            if record.seq != self.cursor.last_seq + 1:
                raise ValidationFailure(
                    f"replica expected seq {self.cursor.last_seq + 1}, got {record.seq}"
                )
            ev.apply_to_state(self.state, record)
            self.cursor.last_seq = record.seq

    def sync(self, store: ProjectStore) -> int:
        """Pull to quiescence; returns the number of records applied."""
        applied = 0
        while True:
            records, _ = pull(store, self.cursor)
            if not records:
                return applied
            self.apply_records(records)  # advances the cursor per record
            applied += len(records)

    def fingerprint(self) -> str:
        return state_fingerprint(self.state)
