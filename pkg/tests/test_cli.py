"""CLI: every subcommand against a real server over real HTTP."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from co_modeler.cli import main, parse_config_file

from synth import noisy_solid, solid

RED, GREEN, BLUE, GRAY = (225, 40, 40), (40, 225, 40), (40, 40, 225), (128, 128, 128)


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, server_url, *args, expect=0, env=None):
    result = runner.invoke(main, ["--server", server_url, *args], env=env, catch_exceptions=False)
    assert result.exit_code == expect, result.output
    return result


def write_tree(root: Path, per_label: dict[str, list[bytes]]) -> Path:
    for label, images in per_label.items():
        directory = root / label
        directory.mkdir(parents=True)
        for i, data in enumerate(images):
            (directory / f"img_{i:03d}.png").write_bytes(data)
    return root


def small_tree(tmp_path, n=5) -> Path:
    rng = np.random.default_rng(1)
    return write_tree(
        tmp_path / "tree",
        {
            "red": [noisy_solid(rng, RED) for _ in range(n)],
            "green": [noisy_solid(rng, GREEN) for _ in range(n)],
            "blue": [noisy_solid(rng, BLUE) for _ in range(n)],
        },
    )


def test_project_create_and_list(runner, module_server):
    result = invoke(runner, module_server.url, "project", "create", "cli-proj")
    assert "created project cli-proj" in result.output
    result = invoke(runner, module_server.url, "--json", "project", "list")
    docs = json.loads(result.output)
    assert any(d["name"] == "cli-proj" for d in docs)


def test_ingest_three_labels_fifteen_samples(runner, module_server, tmp_path):
    tree = small_tree(tmp_path)
    result = invoke(runner, module_server.url, "--json", "ingest", str(tree),
                    "--project", "ingest-a")
    payload = json.loads(result.output)
    assert payload["dataset_report"]["total"] == 15
    assert {r["name"] for r in payload["dataset_report"]["labels"]} == {"red", "green", "blue"}
    assert all(c["uploaded"] == 5 for c in payload["per_label"].values())

    # re-running uploads nothing new thanks to dedupe keys
    result = invoke(runner, module_server.url, "--json", "ingest", str(tree),
                    "--project", "ingest-a")
    payload = json.loads(result.output)
    assert all(c["uploaded"] == 0 and c["duplicate"] == 5 for c in payload["per_label"].values())
    assert payload["dataset_report"]["total"] == 15


def test_ingest_paper_scale_fixture(runner, module_server, tmp_path):
    """74 images over the spaghetti project's four labels."""
    rng = np.random.default_rng(8)
    tree = write_tree(
        tmp_path / "spaghetti",
        {
            "sauce": [noisy_solid(rng, (180, 40, 30)) for _ in range(19)],
            "spaghetti pasta": [noisy_solid(rng, (220, 190, 140)) for _ in range(19)],
            "pot": [noisy_solid(rng, (90, 90, 100)) for _ in range(18)],
            "spoon": [noisy_solid(rng, (200, 200, 210)) for _ in range(18)],
        },
    )
    result = invoke(runner, module_server.url, "--json", "ingest", str(tree),
                    "--project", "spaghetti-family")
    payload = json.loads(result.output)
    assert payload["dataset_report"]["total"] == 74


def test_ingest_reports_unreadable_files_and_continues(runner, module_server, tmp_path):
    tree = small_tree(tmp_path, n=2)
    (tree / "red" / "broken.png").write_bytes(b"not an image at all")
    result = runner.invoke(
        main, ["--server", module_server.url, "--json", "ingest", str(tree),
               "--project", "ingest-broken"],
        catch_exceptions=False,
    )
    assert result.exit_code == 1  # operational error: a file failed
    payload = json.loads(result.output)
    assert len(payload["failures"]) == 1
    assert "broken.png" in payload["failures"][0]["error"]
    assert payload["dataset_report"]["total"] == 6  # the readable files made it


def test_train_classify_and_reports(runner, module_server, tmp_path):
    tree = small_tree(tmp_path)
    invoke(runner, module_server.url, "ingest", str(tree), "--project", "flow")
    result = invoke(runner, module_server.url, "--json", "train", "--project", "flow")
    model = json.loads(result.output)
    assert model["version"] == 1
    assert model["train_sample_count"] == 15

    probe = tmp_path / "probe.png"
    probe.write_bytes(solid(RED))
    figure = tmp_path / "confidence.png"
    result = invoke(runner, module_server.url, "classify", str(probe),
                    "--project", "flow", "--expected", "red", "--figure", str(figure))
    assert "top: red" in result.output
    assert "verdict: correct" in result.output
    assert figure.is_file()

    out_dir = tmp_path / "reports"
    result = invoke(runner, module_server.url, "report", "--project", "flow",
                    "--out-dir", str(out_dir))
    assert "total: 15" in result.output
    assert (out_dir / "dataset_report.csv").is_file()
    assert (out_dir / "dataset_report.png").is_file()
    csv_lines = (out_dir / "dataset_report.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "label_id,name,count"
    assert len(csv_lines) == 4

    result = invoke(runner, module_server.url, "test-report", "--project", "flow",
                    "--out-dir", str(out_dir))
    assert "correct=1" in result.output
    assert (out_dir / "test_report.csv").is_file()
    assert (out_dir / "test_report.png").is_file()


def test_label_commands(runner, module_server):
    invoke(runner, module_server.url, "project", "create", "labels-proj")
    invoke(runner, module_server.url, "label", "add", "labels-proj", "Banana")
    result = invoke(runner, module_server.url, "label", "rename", "labels-proj",
                    "Banana", "Plantain")
    assert "Banana -> Plantain" in result.output
    invoke(runner, module_server.url, "label", "delete", "labels-proj", "Plantain")
    result = invoke(runner, module_server.url, "label", "delete", "labels-proj", "Plantain",
                    expect=1)
    assert "no live label" in result.output


def test_simulate_game_deterministic_and_scored(runner, module_server, tmp_path):
    tree = small_tree(tmp_path)
    invoke(runner, module_server.url, "ingest", str(tree), "--project", "game-proj")
    invoke(runner, module_server.url, "train", "--project", "game-proj")

    manifest = {
        "red": ["tree/red/img_000.png", "tree/red/img_001.png"],
        "green": ["tree/green/img_000.png"],
        "blue": ["tree/blue/img_000.png"],
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest))

    out_dir = tmp_path / "game-out"
    result = invoke(runner, module_server.url, "--json", "simulate-game",
                    "--project", "game-proj", "--manifest", str(manifest_path),
                    "--seed", "7", "--out-dir", str(out_dir))
    payload = json.loads(result.output)
    summary = payload["summary"]
    assert summary["round_count"] == 18
    # manifest shows the model its own training images: near-maximal score
    assert summary["total_score"] > 0.9 * 10 * 18
    assert (out_dir / "game_summary.csv").is_file()
    assert (out_dir / "game_rounds.csv").is_file()
    assert (out_dir / "game_summary.png").is_file()

    rerun = invoke(runner, module_server.url, "--json", "simulate-game",
                   "--project", "game-proj", "--manifest", str(manifest_path), "--seed", "7")
    rerun_summary = json.loads(rerun.output)["summary"]
    assert rerun_summary["rounds"] == summary["rounds"]
    assert rerun_summary["total_score"] == summary["total_score"]


def test_simulate_game_empty_manifest_scores_zero(runner, module_server, tmp_path):
    tree = small_tree(tmp_path)
    invoke(runner, module_server.url, "ingest", str(tree), "--project", "game-empty")
    invoke(runner, module_server.url, "train", "--project", "game-empty")
    manifest_path = tmp_path / "empty.json"
    manifest_path.write_text("{}")
    result = runner.invoke(
        main, ["--server", module_server.url, "--json", "simulate-game",
               "--project", "game-empty", "--manifest", str(manifest_path), "--seed", "3"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    payload = json.loads(result.stdout)
    assert payload["summary"]["total_score"] == 0.0
    assert len(payload["warnings"]) == 18


def test_export_import_round_trip(runner, module_server, tmp_path):
    tree = small_tree(tmp_path)
    invoke(runner, module_server.url, "ingest", str(tree), "--project", "exp-proj")
    dest = tmp_path / "exported"
    result = invoke(runner, module_server.url, "--json", "export", str(dest),
                    "--project", "exp-proj")
    payload = json.loads(result.output)
    assert payload["samples"] == 15
    assert (dest / "manifest.json").is_file()
    assert len(list((dest / "blobs").iterdir())) == 15

    # import into a second, fresh server
    from conftest import LiveServer

    with LiveServer(tmp_path / "other-server") as other:
        result = invoke(runner, other.url, "--json", "import", str(dest))
        doc = json.loads(result.output)
        assert doc["name"] == "exp-proj"
        result = invoke(runner, other.url, "--json", "project", "list")
        assert len(json.loads(result.output)) == 1


def test_gc_command(runner, module_server):
    result = invoke(runner, module_server.url, "--json", "gc")
    assert "removed" in json.loads(result.output)


def test_usage_error_exits_two(runner, module_server):
    result = runner.invoke(main, ["--server", module_server.url, "train"])  # missing --project
    assert result.exit_code == 2


def test_operational_error_exits_one(runner, module_server):
    result = runner.invoke(main, ["--server", module_server.url, "train",
                                  "--project", "does-not-exist"])
    assert result.exit_code == 1
    assert "no project" in result.output


def test_unreachable_server_exits_one(runner, tmp_path):
    result = runner.invoke(main, ["--server", "http://127.0.0.1:9", "project", "list"])
    assert result.exit_code == 1


def test_server_from_env_var(runner, module_server):
    result = runner.invoke(
        main, ["project", "list"], env={"CO_MODELER_SERVER": module_server.url}
    )
    assert result.exit_code == 0


def test_config_file_parsing(tmp_path):
    config = tmp_path / "co-modeler.conf"
    config.write_text(
        "# comment\n"
        "[client]\n"
        "server = http://example.test:9999\n"
        'author = "mom"\n'
    )
    values = parse_config_file(config)
    assert values == {"server": "http://example.test:9999", "author": "mom"}


def test_config_file_supplies_server(runner, module_server, tmp_path):
    config = tmp_path / "my.conf"
    config.write_text(f"server = {module_server.url}\n")
    result = runner.invoke(main, ["--config", str(config), "project", "list"])
    assert result.exit_code == 0
