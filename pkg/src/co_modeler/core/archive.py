"""Project export/import archives.

Archive format: a directory holding ``manifest.json`` (UTF-8, schema
versioned) plus ``blobs/<hex-sha256>`` image files, bytes verbatim. Import
on a fresh server reproduces identical state and head_seq; the manifest's
entity lists are cross-checked against a replay of the embedded event log,
and every blob must hash to its filename.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path
from typing import Any

from ..errors import BlobMissingError, ValidationFailure
from . import events as ev
from .models import EventRecord, ProjectState, state_fingerprint
from .store import ProjectStore

ARCHIVE_SCHEMA_VERSION = 1


def _manifest_doc(state: ProjectState, records: list[EventRecord]) -> dict[str, Any]:
    return {
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "project": {
            "id": state.id,
            "name": state.name,
            "created_at": state.created_at,
            "head_seq": state.head_seq,
        },
        "labels": [
            {"id": l.id, "name": l.name, "deleted": l.deleted} for l in state.labels
        ],
        "samples": [
            {
                "id": s.id,
                "label_id": s.label_id,
                "image_sha256": s.image_ref,
                "author": s.author,
                "deleted": s.deleted,
            }
            for s in state.samples.values()
        ],
        "test_samples": [
            {
                "id": s.id,
                "image_sha256": s.image_ref,
                "author": s.author,
                "expected_label_id": s.expected_label_id,
                "deleted": s.deleted,
            }
            for s in state.test_samples.values()
        ],
        "state_fingerprint": state_fingerprint(state),
        "events": [r.to_json() for r in records],
    }


def _snapshot(store: ProjectStore, project_id: str) -> tuple[ProjectState, list[EventRecord], dict[str, Any]]:
    live = store.get_live(project_id)
    with live.lock:
        records = list(live.events)
        manifest = _manifest_doc(live.state, records)
    hashes = sorted({r.payload["image_sha256"] for r in records if r.payload.get("image_sha256")})
    blobs = {}
    for sha in hashes:
        blobs[sha] = store.blobs.get(sha)  # raises if a referenced blob is gone
    return live.state, records, {"manifest": manifest, "blobs": blobs}


def export_project(store: ProjectStore, project_id: str, dest: str | Path) -> Path:
    """Write the archive directory; dest must not already contain an archive."""
    _, _, bundle = _snapshot(store, project_id)
    dest = Path(dest)
    if (dest / "manifest.json").exists():
        raise ValidationFailure(f"{dest} already contains an archive")
    (dest / "blobs").mkdir(parents=True, exist_ok=True)
    (dest / "manifest.json").write_text(
        json.dumps(bundle["manifest"], indent=2), "utf-8"
    )
    for sha, data in bundle["blobs"].items():
        (dest / "blobs" / sha).write_bytes(data)
    return dest


def export_zip_bytes(store: ProjectStore, project_id: str) -> bytes:
    """The same archive, zipped for wire transfer."""
    _, _, bundle = _snapshot(store, project_id)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(bundle["manifest"], indent=2))
        for sha, data in bundle["blobs"].items():
            zf.writestr(f"blobs/{sha}", data)
    return buf.getvalue()


def _verify_and_register(
    store: ProjectStore,
    manifest: dict[str, Any],
    read_blob: Any,
) -> ProjectState:
    if manifest.get("schema_version") != ARCHIVE_SCHEMA_VERSION:
        raise ValidationFailure(
            f"unsupported archive schema_version {manifest.get('schema_version')!r}"
        )
    meta = manifest["project"]
    records = [EventRecord.from_json(r) for r in manifest["events"]]

    referenced = {r.payload["image_sha256"] for r in records if r.payload.get("image_sha256")}
    blob_bytes: dict[str, bytes] = {}
    for sha in sorted(referenced):
        data = read_blob(sha)
        if data is None:
            raise BlobMissingError(f"archive is missing blob {sha}")
        if hashlib.sha256(data).hexdigest() != sha:
            raise ValidationFailure(f"archive blob {sha} does not hash to its name")
        blob_bytes[sha] = data

    state = ev.replay(meta["id"], meta["name"], meta["created_at"], records)
    if state.head_seq != meta["head_seq"]:
        raise ValidationFailure(
            f"replayed head_seq {state.head_seq} != manifest head_seq {meta['head_seq']}"
        )
    expected = manifest.get("state_fingerprint")
    if expected is not None and state_fingerprint(state) != expected:
        raise ValidationFailure("replayed state does not match the manifest fingerprint")
    manifest_labels = {(l["id"], l["name"], l["deleted"]) for l in manifest["labels"]}
    replayed_labels = {(l.id, l.name, l.deleted) for l in state.labels}
    if manifest_labels != replayed_labels:
        raise ValidationFailure("manifest label list disagrees with the event log")
    if {s["id"] for s in manifest["samples"]} != set(state.samples):
        raise ValidationFailure("manifest sample list disagrees with the event log")
    if {s["id"] for s in manifest["test_samples"]} != set(state.test_samples):
        raise ValidationFailure("manifest test sample list disagrees with the event log")

    for sha, data in blob_bytes.items():
        store.blobs.put(data)
    return store.register_project(meta, records)


def import_project(store: ProjectStore, src: str | Path) -> ProjectState:
    src = Path(src)
    manifest_path = src / "manifest.json"
    if not manifest_path.is_file():
        raise ValidationFailure(f"{src} has no manifest.json")
    manifest = json.loads(manifest_path.read_text("utf-8"))

    def read_blob(sha: str) -> bytes | None:
        path = src / "blobs" / sha
        return path.read_bytes() if path.is_file() else None

    return _verify_and_register(store, manifest, read_blob)


def import_zip_bytes(store: ProjectStore, data: bytes) -> ProjectState:
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise ValidationFailure(f"not a zip archive: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        except KeyError:
            raise ValidationFailure("archive has no manifest.json") from None
        names = set(zf.namelist())

        def read_blob(sha: str) -> bytes | None:
            name = f"blobs/{sha}"
            return zf.read(name) if name in names else None

        return _verify_and_register(store, manifest, read_blob)


def zip_bytes_from_directory(src: str | Path) -> bytes:
    """Zip an on-disk archive directory for upload."""
    src = Path(src)
    if not (src / "manifest.json").is_file():
        raise ValidationFailure(f"{src} has no manifest.json")
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.write(src / "manifest.json", "manifest.json")
        blob_dir = src / "blobs"
        if blob_dir.is_dir():
            for path in sorted(blob_dir.iterdir()):
                if path.is_file():
                    zf.write(path, f"blobs/{path.name}")
    return buf.getvalue()


def unzip_to_directory(data: bytes, dest: str | Path) -> Path:
    """Write a zipped archive out as the canonical directory format."""
    dest = Path(dest)
    if (dest / "manifest.json").exists():
        raise ValidationFailure(f"{dest} already contains an archive")
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        for name in zf.namelist():
            if name != "manifest.json" and not name.startswith("blobs/"):
                raise ValidationFailure(f"unexpected archive member {name!r}")
        dest.mkdir(parents=True, exist_ok=True)
        zf.extractall(dest)
    return dest
