"""Headless driver for the whole workflow over the HTTP API.

The CLI talks to the server through the same documented endpoints as every
other client (no privileged side door), so it doubles as an API conformance
client. Exit codes: 0 success, 1 operational error, 2 usage error. Every
command supports ``--json`` for machine-readable output.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import click
import httpx

DEFAULT_SERVER = "http://127.0.0.1:8770"
SERVER_ENV_VAR = "CO_MODELER_SERVER"
DEFAULT_CONFIG_NAME = "co-modeler.conf"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def parse_config_file(path: Path) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' comments and [section] headers ignored."""
    values: dict[str, str] = {}
    for raw in path.read_text("utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}: cannot parse line {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip().strip("\"'")
    return values


class OperationalError(click.ClickException):
    exit_code = 1


@dataclass
class Context:
    server: str
    author: str
    as_json: bool

    def client(self) -> httpx.Client:
        return httpx.Client(base_url=self.server, timeout=60.0)

    def emit(self, payload: Any, human: Optional[str] = None) -> None:
        if self.as_json:
            click.echo(json.dumps(payload, indent=2))
        elif human is not None:
            click.echo(human)


def api_error(response: httpx.Response) -> OperationalError:
    try:
        detail = response.json()["error"]
        message = f"{detail['code']}: {detail['message']}"
    except Exception:
        message = f"HTTP {response.status_code}: {response.text[:200]}"
    return OperationalError(message)


def checked(response: httpx.Response) -> httpx.Response:
    if response.status_code >= 400:
        raise api_error(response)
    return response


def resolve_project(client: httpx.Client, ref: str) -> dict[str, Any]:
    """Accept a project id or exact name."""
    response = client.get(f"/projects/{ref}")
    if response.status_code == 200:
        return response.json()
    projects = checked(client.get("/projects")).json()
    for project in projects:
        if project["name"] == ref:
            return project
    raise OperationalError(f"no project {ref!r} on {client.base_url}")


def resolve_label(client: httpx.Client, project_id: str, ref: str) -> dict[str, Any]:
    labels = checked(client.get(f"/projects/{project_id}/labels")).json()
    for label in labels:
        if label["id"] == ref or label["name"] == ref:
            return label
    raise OperationalError(f"no live label {ref!r} in project {project_id}")


@click.group()
@click.option("--server", "server_flag", default=None, help=f"Server URL (or ${SERVER_ENV_VAR}).")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help=f"key=value config file (default ./{DEFAULT_CONFIG_NAME} if present).")
@click.option("--author", "author_flag", default=None, help="Author id recorded on mutations.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx: click.Context, server_flag: Optional[str], config_path: Optional[Path],
         author_flag: Optional[str], as_json: bool) -> None:
    """Collaborative image-classifier workbench client."""
    config: dict[str, str] = {}
    if config_path is not None:
        if not config_path.is_file():
            raise click.UsageError(f"config file {config_path} does not exist")
        config = parse_config_file(config_path)
    elif Path(DEFAULT_CONFIG_NAME).is_file():
        config = parse_config_file(Path(DEFAULT_CONFIG_NAME))

    server = server_flag or os.environ.get(SERVER_ENV_VAR) or config.get("server") or DEFAULT_SERVER
    author = author_flag or config.get("author") or "cli"
    ctx.obj = Context(server=server.rstrip("/"), author=author, as_json=as_json)


# -- serve ---------------------------------------------------------------------


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8770, show_default=True)
@click.option("--data-dir", type=click.Path(path_type=Path), default=Path("./co-modeler-data"),
              show_default=True)
@click.option("--max-upload-mb", default=10, show_default=True)
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Static frontend directory to mount at /ui.")
@click.option("--log-level", default="info", show_default=True)
def serve(host: str, port: int, data_dir: Path, max_upload_mb: int,
          ui_dir: Optional[Path], log_level: str) -> None:
    """Run the co-modeler server."""
    from .api import ApiConfig, serve as run_server

    run_server(ApiConfig(
        data_dir=data_dir,
        host=host,
        port=port,
        max_upload_bytes=max_upload_mb * 1024 * 1024,
        ui_dir=ui_dir,
        log_level=log_level,
    ))


# -- project -------------------------------------------------------------------


@main.group()
def project() -> None:
    """Create and list projects."""


@project.command("create")
@click.argument("name")
@click.pass_obj
def project_create(ctx: Context, name: str) -> None:
    """Create an empty project."""
    with ctx.client() as client:
        doc = checked(client.post("/projects", json={"name": name})).json()
    ctx.emit(doc, f"created project {doc['name']} ({doc['id']})")


@project.command("list")
@click.pass_obj
def project_list(ctx: Context) -> None:
    """List projects with label and sample counts."""
    with ctx.client() as client:
        docs = checked(client.get("/projects")).json()
    lines = [
        f"{doc['id']}  {doc['name']}  labels={len([l for l in doc['labels'] if not l['deleted']])}"
        f" samples={doc['sample_count']} head_seq={doc['head_seq']}"
        for doc in docs
    ]
    ctx.emit(docs, "\n".join(lines) if lines else "no projects")


# -- label ---------------------------------------------------------------------


@main.group()
def label() -> None:
    """Manage the label ontology."""


@label.command("add")
@click.argument("project_ref")
@click.argument("name")
@click.pass_obj
def label_add(ctx: Context, project_ref: str, name: str) -> None:
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        doc = checked(client.post(
            f"/projects/{proj['id']}/labels",
            json={"name": name},
            params={"author": ctx.author},
        )).json()
    ctx.emit(doc, f"added label {doc['name']} ({doc['id']})")


@label.command("rename")
@click.argument("project_ref")
@click.argument("label_ref")
@click.argument("new_name")
@click.pass_obj
def label_rename(ctx: Context, project_ref: str, label_ref: str, new_name: str) -> None:
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        lab = resolve_label(client, proj["id"], label_ref)
        doc = checked(client.patch(
            f"/projects/{proj['id']}/labels/{lab['id']}",
            json={"name": new_name},
            params={"author": ctx.author},
        )).json()
    ctx.emit(doc, f"renamed label {lab['name']} -> {doc['name']}")


@label.command("delete")
@click.argument("project_ref")
@click.argument("label_ref")
@click.pass_obj
def label_delete(ctx: Context, project_ref: str, label_ref: str) -> None:
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        lab = resolve_label(client, proj["id"], label_ref)
        checked(client.delete(
            f"/projects/{proj['id']}/labels/{lab['id']}", params={"author": ctx.author}
        ))
    ctx.emit({"ok": True, "label_id": lab["id"]}, f"deleted label {lab['name']}")


# -- ingest ---------------------------------------------------------------------


def _iter_image_files(directory: Path) -> dict[str, list[Path]]:
    by_label: dict[str, list[Path]] = {}
    for child in sorted(directory.iterdir()):
        if not child.is_dir():
            continue
        files = sorted(
            p for p in child.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
        )
        if files:
            by_label[child.name] = files
    return by_label


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--project", "project_ref", required=True, help="Project id or name (created if missing).")
@click.option("--jobs", default=4, show_default=True, help="Concurrent uploads.")
@click.pass_obj
def ingest(ctx: Context, directory: Path, project_ref: str, jobs: int) -> None:
    """Upload a directory tree laid out as <dir>/<label-name>/*.{png,jpg}.

    Labels are created as needed; re-running is idempotent thanks to
    content-derived dedupe keys. Unreadable files are listed in the report
    and the rest proceed.
    """
    by_label = _iter_image_files(directory)
    if not by_label:
        raise OperationalError(f"{directory} has no <label>/<image> subdirectories")

    with ctx.client() as client:
        response = client.get(f"/projects/{project_ref}")
        if response.status_code == 200:
            proj = response.json()
        else:
            projects = checked(client.get("/projects")).json()
            proj = next((p for p in projects if p["name"] == project_ref), None)
            if proj is None:
                proj = checked(client.post("/projects", json={"name": project_ref})).json()

        label_ids = {}
        existing = checked(client.get(f"/projects/{proj['id']}/labels")).json()
        for doc in existing:
            label_ids[doc["name"]] = doc["id"]
        for name in by_label:
            if name not in label_ids:
                doc = checked(client.post(
                    f"/projects/{proj['id']}/labels",
                    json={"name": name},
                    params={"author": ctx.author},
                )).json()
                label_ids[name] = doc["id"]

        counts = {name: {"uploaded": 0, "duplicate": 0} for name in by_label}
        failures: list[dict[str, str]] = []

        def upload(name: str, path: Path) -> tuple[str, Optional[str], bool]:
            try:
                data = path.read_bytes()
            except OSError as exc:
                return name, f"{path}: {exc}", False
            digest = hashlib.sha256(data).hexdigest()
            response = client.post(
                f"/projects/{proj['id']}/samples",
                files={"image": (path.name, data)},
                data={
                    "label_id": label_ids[name],
                    "author": ctx.author,
                    "dedupe_key": f"ingest:{name}:{digest}",
                },
            )
            if response.status_code >= 400:
                return name, f"{path}: {api_error(response).message}", False
            return name, None, response.json()["created"]

        with concurrent.futures.ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
            futures = [
                pool.submit(upload, name, path)
                for name, paths in by_label.items()
                for path in paths
            ]
            for future in concurrent.futures.as_completed(futures):
                name, failure, created = future.result()
                if failure is not None:
                    failures.append({"label": name, "error": failure})
                elif created:
                    counts[name]["uploaded"] += 1
                else:
                    counts[name]["duplicate"] += 1

        report = checked(client.get(f"/projects/{proj['id']}/report")).json()

    payload = {
        "project_id": proj["id"],
        "per_label": counts,
        "failures": failures,
        "dataset_report": report,
    }
    lines = [
        f"{name}: +{c['uploaded']} uploaded, {c['duplicate']} duplicate"
        for name, c in counts.items()
    ]
    lines.append(f"dataset total: {report['total']} live samples")
    for failure in failures:
        lines.append(f"FAILED {failure['label']}: {failure['error']}")
    ctx.emit(payload, "\n".join(lines))
    if failures:
        sys.exit(1)


# -- train / classify -------------------------------------------------------------


@main.command()
@click.option("--project", "project_ref", required=True)
@click.pass_obj
def train(ctx: Context, project_ref: str) -> None:
    """Train a new model version on all live samples."""
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        doc = checked(client.post(
            f"/projects/{proj['id']}/train", params={"author": ctx.author}
        )).json()
    ctx.emit(
        doc,
        f"trained model v{doc['version']} on {doc['train_sample_count']} samples "
        f"({len(doc['label_ids'])} labels)",
    )


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--project", "project_ref", required=True)
@click.option("--expected", default=None, help="Ground-truth label (id or name) to record.")
@click.option("--figure", type=click.Path(path_type=Path), default=None,
              help="Write a confidence bar chart PNG here.")
@click.pass_obj
def classify(ctx: Context, image: Path, project_ref: str, expected: Optional[str],
             figure: Optional[Path]) -> None:
    """Photo-mode classification; the image is kept as a test sample."""
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        doc = checked(client.post(
            f"/projects/{proj['id']}/classify",
            files={"image": (image.name, image.read_bytes())},
            params={"author": ctx.author},
        )).json()
        labels = {l["id"]: l["name"] for l in checked(
            client.get(f"/projects/{proj['id']}/labels", params={"include_deleted": True})
        ).json()}
        if expected is not None:
            lab = resolve_label(client, proj["id"], expected)
            doc["sample"] = checked(client.post(
                f"/projects/{proj['id']}/test-samples/{doc['sample']['id']}/expected-label",
                json={"label_id": lab["id"]},
                params={"author": ctx.author},
            )).json()

    result = doc["result"]
    dist = sorted(result["distribution"].items(), key=lambda kv: -kv[1])
    lines = [f"top: {labels.get(result['top_label_id'], result['top_label_id'])} "
             f"({result['top_confidence'] * 100:.1f}%)"]
    for label_id, confidence in dist:
        lines.append(f"  {labels.get(label_id, label_id)}: {confidence * 100:.1f}%")
    correct = doc["sample"].get("correct")
    if correct is not None:
        lines.append("verdict: correct" if correct else "verdict: incorrect")

    if figure is not None:
        from . import reporting

        names = [labels.get(label_id, label_id) for label_id, _ in dist]
        reporting.confidence_figure(names, [c for _, c in dist], figure)
        lines.append(f"figure: {figure}")
    ctx.emit(doc, "\n".join(lines))


# -- reports -----------------------------------------------------------------------


@main.command()
@click.option("--project", "project_ref", required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Write dataset_report.csv and dataset_report.png here.")
@click.pass_obj
def report(ctx: Context, project_ref: str, out_dir: Optional[Path]) -> None:
    """Per-label live sample counts (class balance)."""
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        doc = checked(client.get(f"/projects/{proj['id']}/report")).json()

    lines = [f"{row['name']}: {row['count']}" for row in doc["labels"]]
    lines.append(f"total: {doc['total']}")
    if doc["imbalance_ratio"] is not None:
        lines.append(f"imbalance ratio: {doc['imbalance_ratio']:.2f}")
    if out_dir is not None:
        from . import reporting

        csv_path = reporting.write_delimited(
            out_dir / "dataset_report.csv",
            ["label_id", "name", "count"],
            [[row["label_id"], row["name"], row["count"]] for row in doc["labels"]],
        )
        png_path = reporting.dataset_report_figure(
            [row["name"] for row in doc["labels"]],
            [row["count"] for row in doc["labels"]],
            out_dir / "dataset_report.png",
        )
        lines.append(f"wrote {csv_path} and {png_path}")
    ctx.emit(doc, "\n".join(lines))


@main.command("test-report")
@click.option("--project", "project_ref", required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Write test_report.csv and test_report.png here.")
@click.pass_obj
def test_report(ctx: Context, project_ref: str, out_dir: Optional[Path]) -> None:
    """Test dashboard: misclassified first, newest first within groups."""
    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        docs = checked(client.get(f"/projects/{proj['id']}/test-dashboard")).json()
        labels = {l["id"]: l["name"] for l in checked(
            client.get(f"/projects/{proj['id']}/labels", params={"include_deleted": True})
        ).json()}

    badge_marks = {"cross": "x", "check": "ok", "none": "-"}
    lines = []
    for doc in docs:
        result = doc["latest_result"]
        top = labels.get(result["top_label_id"], "?") if result else "?"
        expected = labels.get(doc["expected_label_id"], "?") if doc["expected_label_id"] else "-"
        lines.append(
            f"[{badge_marks[doc['badge']]}] {doc['id'][:8]} top={top} expected={expected} "
            f"v{doc['latest_model_version']}"
        )
    wrong = sum(1 for d in docs if d["badge"] == "cross")
    right = sum(1 for d in docs if d["badge"] == "check")
    unverdicted = sum(1 for d in docs if d["badge"] == "none")
    lines.append(f"misclassified={wrong} correct={right} no-verdict={unverdicted}")

    if out_dir is not None:
        from . import reporting

        csv_path = reporting.write_delimited(
            out_dir / "test_report.csv",
            ["sample_id", "badge", "top_label", "expected_label", "model_version"],
            [
                [
                    d["id"],
                    d["badge"],
                    labels.get(d["latest_result"]["top_label_id"], "") if d["latest_result"] else "",
                    labels.get(d["expected_label_id"], "") if d["expected_label_id"] else "",
                    d["latest_model_version"],
                ]
                for d in docs
            ],
        )
        png_path = reporting.test_report_figure(wrong, right, unverdicted, out_dir / "test_report.png")
        lines.append(f"wrote {csv_path} and {png_path}")
    ctx.emit({"samples": docs, "misclassified": wrong, "correct": right,
              "no_verdict": unverdicted}, "\n".join(lines))


# -- game ---------------------------------------------------------------------------


@main.command("simulate-game")
@click.option("--project", "project_ref", required=True)
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON mapping label name -> list of image paths to show.")
@click.option("--seed", required=True, type=int)
@click.option("--duration", "duration_s", default=90.0, show_default=True)
@click.option("--round-len", "round_s", default=5.0, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Write game_summary.csv/.png and game_rounds.csv here.")
@click.pass_obj
def simulate_game(ctx: Context, project_ref: str, manifest_path: Path, seed: int,
                  duration_s: float, round_s: float, out_dir: Optional[Path]) -> None:
    """Run a full Restaurant Frenzy session on a simulated clock.

    The manifest maps each label name to a pool of images to present when
    that label is the round target; rounds whose target is missing from the
    manifest score 0 with a warning.
    """
    manifest = json.loads(manifest_path.read_text("utf-8"))
    if not isinstance(manifest, dict):
        raise click.UsageError("manifest must be a JSON object of label -> [image paths]")
    base = manifest_path.parent
    pools: dict[str, list[Path]] = {}
    for name, entries in manifest.items():
        pools[name] = [(base / e) if not Path(e).is_absolute() else Path(e) for e in entries]

    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        session = checked(client.post(
            f"/projects/{proj['id']}/game",
            json={"seed": seed, "duration_s": duration_s, "round_s": round_s, "simulated": True},
        )).json()
        sid = session["id"]
        warnings = []
        for _ in range(session["round_count"]):
            state = checked(client.get(f"/projects/{proj['id']}/game/{sid}")).json()
            if state["state"] != "running":
                break
            rnd = state["current_round"]
            target = rnd["target_name"]
            pool = pools.get(target)
            if not pool:
                warnings.append(f"round {rnd['index']}: no manifest images for {target!r}")
            else:
                path = pool[(rnd["index"] - 1) % len(pool)]
                checked(client.post(
                    f"/projects/{proj['id']}/game/{sid}/frames",
                    params={"round_index": rnd["index"]},
                    files={"image": (path.name, path.read_bytes())},
                ))
            checked(client.post(
                f"/projects/{proj['id']}/game/{sid}/advance", json={"seconds": round_s}
            ))
        summary = checked(client.get(f"/projects/{proj['id']}/game/{sid}/summary")).json()

    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)
    lines = [f"total score: {summary['total_score']:.1f} over {summary['round_count']} rounds "
             f"(high score {summary['high_score']:.1f})"]
    for row in summary["labels"]:
        lines.append(
            f"  {row['name']}: avg confidence {row['average_confidence_pct']:.1f}% "
            f"over {row['rounds_played']} round(s)"
        )
    lines.append("round  target        top           score")
    for row in summary["rounds"]:
        lines.append(
            f"{row['index']:>5}  {row['target_name']:<12.12}  {str(row['top_name']):<12.12}  "
            f"{row['score']:.2f}"
        )

    if out_dir is not None:
        from . import reporting

        reporting.write_delimited(
            out_dir / "game_summary.csv",
            ["label", "rounds_played", "average_confidence_pct"],
            [[r["name"], r["rounds_played"], r["average_confidence_pct"]] for r in summary["labels"]],
        )
        reporting.write_delimited(
            out_dir / "game_rounds.csv",
            ["index", "target", "top", "score", "correct"],
            [[r["index"], r["target_name"], r["top_name"], r["score"], r["correct"]]
             for r in summary["rounds"]],
        )
        reporting.game_summary_figure(
            [r["name"] for r in summary["labels"]],
            [r["average_confidence_pct"] for r in summary["labels"]],
            summary["total_score"],
            out_dir / "game_summary.png",
        )
        lines.append(f"wrote reports to {out_dir}")
    ctx.emit({"summary": summary, "warnings": warnings}, "\n".join(lines))


# -- archive ---------------------------------------------------------------------------


@main.command("export")
@click.argument("dest", type=click.Path(path_type=Path))
@click.option("--project", "project_ref", required=True)
@click.pass_obj
def export_cmd(ctx: Context, dest: Path, project_ref: str) -> None:
    """Download a project archive (manifest.json + blobs/) into DEST."""
    from .core.archive import unzip_to_directory

    with ctx.client() as client:
        proj = resolve_project(client, project_ref)
        data = checked(client.get(f"/projects/{proj['id']}/export")).content
    unzip_to_directory(data, dest)
    manifest = json.loads((dest / "manifest.json").read_text("utf-8"))
    ctx.emit(
        {"dest": str(dest), "head_seq": manifest["project"]["head_seq"],
         "samples": len(manifest["samples"])},
        f"exported {proj['name']} to {dest} "
        f"({len(manifest['samples'])} samples, head_seq {manifest['project']['head_seq']})",
    )


@main.command("import")
@click.argument("src", type=click.Path(exists=True, path_type=Path))
@click.pass_obj
def import_cmd(ctx: Context, src: Path) -> None:
    """Upload an archive directory (or .zip) as a new project."""
    from .core.archive import zip_bytes_from_directory

    data = src.read_bytes() if src.is_file() else zip_bytes_from_directory(src)
    with ctx.client() as client:
        doc = checked(client.post(
            "/projects/import", content=data, headers={"Content-Type": "application/zip"}
        )).json()
    ctx.emit(doc, f"imported project {doc['name']} ({doc['id']}) at head_seq {doc['head_seq']}")


@main.command()
@click.pass_obj
def gc(ctx: Context) -> None:
    """Delete stored blobs referenced by no event (maintenance)."""
    with ctx.client() as client:
        doc = checked(client.post("/admin/gc")).json()
    ctx.emit(doc, f"removed {doc['removed']} orphaned blob(s)")


if __name__ == "__main__":
    main()
