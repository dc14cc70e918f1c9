"""HTTP + event-stream surface exposing every module to clients.

JSON wire encoding throughout; images travel as multipart fields or raw
bodies; the event stream is newline-delimited JSON over a held connection,
resumable via ``since``. Module errors map to 4xx/5xx with machine-readable
codes. The OpenAPI description is generated from these routes at
``/openapi.json``.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, File, Form, Query, Request, UploadFile, WebSocket
from fastapi.responses import JSONResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import classify, sync
from .clock import ManualClock
from .core import archive
from .core.models import (
    ClassificationResult,
    Label,
    ModelVersion,
    ProjectState,
    TestSample,
    TrainingSample,
    dataset_report,
)
from .core.store import ProjectStore
from .errors import CoModelerError, NotFoundError, PayloadTooLargeError, ValidationFailure
from .game import GameManager, GameSession, GameSummary
from .trainer import TrainingConfig, predict, train_project

logger = logging.getLogger(__name__)

DEFAULT_MAX_UPLOAD_BYTES = 10 * 1024 * 1024
DEFAULT_AUTHOR = "anonymous"

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


# -- wire schemas -------------------------------------------------------------


class ProjectCreate(BaseModel):
    name: str


class LabelCreate(BaseModel):
    name: str


class LabelRename(BaseModel):
    name: str


class ExpectedLabelSet(BaseModel):
    label_id: Optional[str] = None


class GameStart(BaseModel):
    seed: int
    duration_s: float = 90.0
    round_s: float = 5.0
    simulated: bool = False


class GameAdvance(BaseModel):
    seconds: float


class TrainRequest(BaseModel):
    learning_rate: float = 0.1
    epochs: int = Field(default=300, ge=1)
    l2_penalty: float = 1e-3


# -- JSON views ---------------------------------------------------------------


def label_doc(label: Label) -> dict[str, Any]:
    return {"id": label.id, "name": label.name, "deleted": label.deleted}


def result_doc(result: Optional[ClassificationResult], correct: Optional[bool] = None) -> Optional[dict[str, Any]]:
    if result is None:
        return None
    doc = result.to_payload()
    doc["correct"] = correct
    return doc


def sample_doc(sample: TrainingSample) -> dict[str, Any]:
    return {
        "id": sample.id,
        "label_id": sample.label_id,
        "image_sha256": sample.image_ref,
        "author": sample.author,
        "added_at": sample.added_at,
        "deleted": sample.deleted,
    }


def test_sample_doc(state: ProjectState, sample: TestSample) -> dict[str, Any]:
    correct = state.sample_correct(sample)
    return {
        "id": sample.id,
        "image_sha256": sample.image_ref,
        "author": sample.author,
        "added_at": sample.added_at,
        "expected_label_id": sample.expected_label_id,
        "latest_result": result_doc(sample.latest_result, correct),
        "latest_model_version": sample.latest_model_version,
        "correct": correct,
        "deleted": sample.deleted,
    }


def model_doc(model: Optional[ModelVersion], include_params: bool = False) -> Optional[dict[str, Any]]:
    if model is None:
        return None
    doc = {
        "version": model.version,
        "label_ids": list(model.label_ids),
        "trained_at": model.trained_at,
        "train_sample_count": model.train_sample_count,
        "schema_version": model.schema_version,
        "lr_reductions": model.lr_reductions,
    }
    if include_params:
        doc.update(model.to_payload())
    return doc


def project_doc(state: ProjectState, high_score: Optional[float] = None) -> dict[str, Any]:
    return {
        "id": state.id,
        "name": state.name,
        "created_at": state.created_at,
        "head_seq": state.head_seq,
        "labels": [label_doc(l) for l in state.labels],
        "sample_count": len(state.live_samples()),
        "test_sample_count": len(state.live_test_samples()),
        "current_model": model_doc(state.current_model),
        "high_score": high_score,
    }


def report_doc(state: ProjectState) -> dict[str, Any]:
    report = dataset_report(state)
    return {
        "labels": [
            {"label_id": r.label_id, "name": r.name, "count": r.count} for r in report.rows
        ],
        "total": report.total,
        "imbalance_ratio": report.imbalance_ratio,
    }


def session_doc(session: GameSession) -> dict[str, Any]:
    names = {l.id: l.name for l in session.labels}
    current = session.current_round_index()
    doc = {
        "id": session.id,
        "project_id": session.project_id,
        "model_version": session.model_version,
        "rng_seed": session.rng_seed,
        "duration_s": session.duration_s,
        "round_s": session.round_s,
        "round_count": session.round_count,
        "state": session.state,
        "time_left_s": session.time_left(),
        "current_round": None,
        "total_score": session.total_score if session.state == "finished" else None,
    }
    if session.state == "running":
        rnd = session.rounds[current - 1]
        doc["current_round"] = {
            "index": rnd.index,
            "target_label_id": rnd.target_label_id,
            "target_name": names[rnd.target_label_id],
            "ends_in_s": max(rnd.index * session.round_s - session.elapsed(), 0.0),
        }
    return doc


def summary_doc(summary: GameSummary) -> dict[str, Any]:
    return {
        "session_id": summary.session_id,
        "project_id": summary.project_id,
        "model_version": summary.model_version,
        "total_score": summary.total_score,
        "round_count": summary.round_count,
        "high_score": summary.high_score,
        "labels": [
            {
                "label_id": row.label_id,
                "name": row.name,
                "rounds_played": row.rounds_played,
                "average_confidence_pct": row.average_confidence_pct,
            }
            for row in summary.labels
        ],
        "rounds": [
            {
                "index": row.index,
                "target_label_id": row.target_label_id,
                "target_name": row.target_name,
                "top_label_id": row.top_label_id,
                "top_name": row.top_name,
                "score": row.score,
                "correct": row.correct,
            }
            for row in summary.rounds
        ],
    }


# -- app factory ---------------------------------------------------------------


@dataclass
class ApiConfig:
    data_dir: str | Path
    host: str = "127.0.0.1"
    port: int = 8770
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES
    ui_dir: Optional[str | Path] = None
    log_level: str = "info"


def create_app(
    data_dir: str | Path,
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
    ui_dir: Optional[str | Path] = None,
) -> FastAPI:
    store = ProjectStore(data_dir)
    games = GameManager(store)
    app = FastAPI(title="co-modeler", version="0.1.0")
    app.state.store = store
    app.state.games = games
    app.state.max_upload_bytes = max_upload_bytes

    @app.exception_handler(CoModelerError)
    async def co_modeler_error(_request: Request, exc: CoModelerError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    def check_size(data: bytes) -> bytes:
        if len(data) > max_upload_bytes:
            raise PayloadTooLargeError(
                f"upload of {len(data)} bytes exceeds the {max_upload_bytes} byte limit"
            )
        return data

    async def read_image(
        request: Request, image: Optional[UploadFile]
    ) -> bytes:
        if image is not None:
            return check_size(await image.read())
        body = await request.body()
        if not body:
            raise ValidationFailure("no image bytes: send multipart 'image' or a raw body")
        return check_size(body)

    # -- projects ------------------------------------------------------------

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {"ok": True}

    @app.post("/projects", status_code=201)
    def create_project(req: ProjectCreate) -> dict[str, Any]:
        state = store.create_project(req.name)
        return project_doc(state)

    @app.get("/projects")
    def list_projects() -> list[dict[str, Any]]:
        return [project_doc(s) for s in store.projects()]

    @app.get("/projects/{project_id}")
    def get_project(project_id: str) -> dict[str, Any]:
        state = store.get_state(project_id)
        return project_doc(state, high_score=store.high_score(project_id))

    @app.get("/projects/{project_id}/model")
    def get_model(project_id: str) -> dict[str, Any]:
        state = store.get_state(project_id)
        doc = model_doc(state.current_model, include_params=True)
        if doc is None:
            raise NotFoundError(f"project {project_id} has no trained model")
        return doc

    @app.get("/projects/{project_id}/report")
    def get_report(project_id: str) -> dict[str, Any]:
        live = store.get_live(project_id)
        with live.lock:
            return report_doc(live.state)

    # -- labels -----------------------------------------------------------------

    @app.post("/projects/{project_id}/labels", status_code=201)
    def add_label(project_id: str, req: LabelCreate, author: str = DEFAULT_AUTHOR) -> dict[str, Any]:
        return label_doc(store.add_label(project_id, req.name, author))

    @app.get("/projects/{project_id}/labels")
    def list_labels(project_id: str, include_deleted: bool = False) -> list[dict[str, Any]]:
        state = store.get_state(project_id)
        labels = state.labels if include_deleted else state.live_labels()
        return [label_doc(l) for l in labels]

    @app.patch("/projects/{project_id}/labels/{label_id}")
    def rename_label(
        project_id: str, label_id: str, req: LabelRename, author: str = DEFAULT_AUTHOR
    ) -> dict[str, Any]:
        return label_doc(store.rename_label(project_id, label_id, req.name, author))

    @app.delete("/projects/{project_id}/labels/{label_id}")
    def delete_label(project_id: str, label_id: str, author: str = DEFAULT_AUTHOR) -> dict[str, Any]:
        store.delete_label(project_id, label_id, author)
        return {"ok": True}

    # -- samples ------------------------------------------------------------------

    @app.post("/projects/{project_id}/samples")
    def upload_sample(
        project_id: str,
        response: Response,
        image: UploadFile = File(...),
        label_id: str = Form(...),
        author: str = Form(DEFAULT_AUTHOR),
        dedupe_key: Optional[str] = Form(None),
    ) -> dict[str, Any]:
        data = check_size(image.file.read())
        sample, created = store.add_sample(project_id, label_id, data, author, dedupe_key)
        response.status_code = 201 if created else 200
        doc = sample_doc(sample)
        doc["created"] = created
        return doc

    @app.get("/projects/{project_id}/samples")
    def list_samples(
        project_id: str,
        label_id: Optional[str] = None,
        include_deleted: bool = False,
    ) -> list[dict[str, Any]]:
        state = store.get_state(project_id)
        docs = []
        for sample in state.samples.values():
            if sample.deleted and not include_deleted:
                continue
            if label_id is not None and sample.label_id != label_id:
                continue
            docs.append(sample_doc(sample))
        return docs

    @app.delete("/projects/{project_id}/samples/{sample_id}")
    def delete_sample(project_id: str, sample_id: str, author: str = DEFAULT_AUTHOR) -> dict[str, Any]:
        store.delete_sample(project_id, sample_id, author)
        return {"ok": True}

    # -- training / classification ---------------------------------------------------

    @app.post("/projects/{project_id}/train")
    def train(project_id: str, req: Optional[TrainRequest] = None, author: str = DEFAULT_AUTHOR) -> dict[str, Any]:
        config = TrainingConfig()
        if req is not None:
            config = TrainingConfig(
                learning_rate=req.learning_rate, epochs=req.epochs, l2_penalty=req.l2_penalty
            )
        model = train_project(store, project_id, author, config)
        doc = model_doc(model)
        assert doc is not None
        return doc

    @app.post("/projects/{project_id}/classify")
    async def photo_classify_endpoint(
        project_id: str,
        request: Request,
        image: Optional[UploadFile] = File(None),
        author: str = DEFAULT_AUTHOR,
    ) -> dict[str, Any]:
        data = await read_image(request, image)
        sample, result = classify.photo_classify(store, project_id, data, author)
        state = store.get_state(project_id)
        return {
            "sample": test_sample_doc(state, sample),
            "result": result_doc(result, state.sample_correct(sample)),
        }

    @app.websocket("/projects/{project_id}/classify/live")
    async def live_classify_ws(websocket: WebSocket, project_id: str) -> None:
        """Binary image frames in, JSON results out, throttled to 5 Hz."""
        await websocket.accept()
        live = store.get_live(project_id)
        min_interval = 1.0 / classify.LIVE_MAX_RATE_HZ
        last_emit: Optional[float] = None
        try:
            while True:
                frame = await websocket.receive_bytes()
                now = time.monotonic()
                if last_emit is not None and (now - last_emit) < min_interval:
                    continue
                with live.lock:
                    model = live.state.current_model
                if model is None:
                    await websocket.send_json(
                        {"error": {"code": "no_model", "message": "train a model first"}}
                    )
                    continue
                last_emit = now
                result = predict(model, store.features_for_bytes(frame))
                await websocket.send_json({"result": result_doc(result)})
        except Exception:  # disconnect or protocol error; nothing to clean up
            return

    # -- test samples / dashboard ------------------------------------------------------

    @app.get("/projects/{project_id}/test-dashboard")
    def test_dashboard_endpoint(project_id: str) -> list[dict[str, Any]]:
        live = store.get_live(project_id)
        with live.lock:
            views = classify.test_dashboard(live.state)
            docs = []
            for view in views:
                doc = test_sample_doc(live.state, view.sample)
                doc["badge"] = view.badge
                docs.append(doc)
            return docs

    @app.post("/projects/{project_id}/test-samples/{sample_id}/expected-label")
    def set_expected_label(
        project_id: str, sample_id: str, req: ExpectedLabelSet, author: str = DEFAULT_AUTHOR
    ) -> dict[str, Any]:
        sample = store.set_expected_label(project_id, sample_id, req.label_id, author)
        return test_sample_doc(store.get_state(project_id), sample)

    @app.delete("/projects/{project_id}/test-samples/{sample_id}")
    def delete_test_sample(
        project_id: str, sample_id: str, author: str = DEFAULT_AUTHOR
    ) -> dict[str, Any]:
        store.delete_test_sample(project_id, sample_id, author)
        return {"ok": True}

    # -- events / sync ------------------------------------------------------------------

    @app.get("/projects/{project_id}/events")
    def pull_events(project_id: str, since: int = Query(0, ge=0)) -> dict[str, Any]:
        records = store.events_since(project_id, since)
        state = store.get_state(project_id)
        return {
            "events": [r.to_json() for r in records],
            "head_seq": state.head_seq,
        }

    @app.get("/projects/{project_id}/events/stream")
    def stream_events(project_id: str, since: int = Query(0, ge=0)) -> StreamingResponse:
        store.events_since(project_id, since)  # 404 / cursor check before streaming

        def ndjson():
            # Blank lines are keepalives; they also surface dead connections.
            for record in store.subscribe(project_id, since, idle_yield_s=1.0):
                if record is None:
                    yield "\n"
                else:
                    yield json.dumps(record.to_json(), separators=(",", ":")) + "\n"

        return StreamingResponse(ndjson(), media_type="application/x-ndjson")

    @app.get("/blobs/{sha}")
    def get_blob(sha: str) -> Response:
        data = sync.fetch_blob(store, sha)
        media = "image/png" if data.startswith(PNG_MAGIC) else "image/jpeg"
        return Response(content=data, media_type=media)

    # -- game ------------------------------------------------------------------------------

    @app.post("/projects/{project_id}/game", status_code=201)
    def start_game(project_id: str, req: GameStart) -> dict[str, Any]:
        clock = ManualClock() if req.simulated else None
        session = games.start_game(
            project_id, req.seed, duration_s=req.duration_s, round_s=req.round_s, clock=clock
        )
        return session_doc(session)

    @app.get("/projects/{project_id}/game/{session_id}")
    def get_game(project_id: str, session_id: str) -> dict[str, Any]:
        session = games.get(session_id)
        if session.project_id != project_id:
            raise NotFoundError(f"no session {session_id} in project {project_id}")
        return session_doc(session)

    @app.post("/projects/{project_id}/game/{session_id}/frames")
    async def submit_frame(
        project_id: str,
        session_id: str,
        request: Request,
        round_index: int = Query(..., ge=1),
        image: Optional[UploadFile] = File(None),
    ) -> dict[str, Any]:
        data = await read_image(request, image)
        result = games.submit_frame(session_id, round_index, data)
        return {"result": result_doc(result)}

    @app.post("/projects/{project_id}/game/{session_id}/advance")
    def advance_game(project_id: str, session_id: str, req: GameAdvance) -> dict[str, Any]:
        session = games.advance_clock(session_id, req.seconds)
        return session_doc(session)

    @app.get("/projects/{project_id}/game/{session_id}/summary")
    def game_summary(project_id: str, session_id: str) -> dict[str, Any]:
        summary = games.game_summary(session_id)
        if summary.project_id != project_id:
            raise NotFoundError(f"no session {session_id} in project {project_id}")
        return summary_doc(summary)

    # -- archive / maintenance ------------------------------------------------------------

    @app.get("/projects/{project_id}/export")
    def export_project(project_id: str) -> Response:
        data = archive.export_zip_bytes(store, project_id)
        state = store.get_state(project_id)
        return Response(
            content=data,
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="{state.name}.zip"'},
        )

    @app.post("/projects/import", status_code=201)
    async def import_project(request: Request) -> dict[str, Any]:
        data = await request.body()
        state = archive.import_zip_bytes(store, data)
        return project_doc(state)

    @app.post("/admin/gc")
    def collect_garbage() -> dict[str, Any]:
        return {"removed": store.collect_garbage()}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(config: ApiConfig) -> None:
    """Run the service; fails fast on a busy port or unwritable data dir."""
    import uvicorn

    data_dir = Path(config.data_dir)
    try:
        data_dir.mkdir(parents=True, exist_ok=True)
        probe = data_dir / ".write-probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        raise SystemExit(f"data directory {data_dir} is not writable: {exc}") from exc

    app = create_app(data_dir, config.max_upload_bytes, ui_dir=config.ui_dir)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level)
