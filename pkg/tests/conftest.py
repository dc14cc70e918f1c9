"""Shared fixtures: stores, a real HTTP server, and image helpers."""

from __future__ import annotations

import logging
import socket
import threading
import time

import pytest
import uvicorn

from co_modeler.api import create_app
from co_modeler.core.store import ProjectStore

# The trainer warns when it halves the learning rate on purpose-built
# pathological fixtures; keep test output quiet.
logging.getLogger("co_modeler.trainer").setLevel(logging.ERROR)


@pytest.fixture()
def store(tmp_path) -> ProjectStore:
    return ProjectStore(tmp_path / "data")


class LiveServer:
    def __init__(self, data_dir, **app_kwargs):
        self.app = create_app(data_dir, **app_kwargs)
        self.store: ProjectStore = self.app.state.store
        config = uvicorn.Config(self.app, host="127.0.0.1", port=0, log_level="error")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self) -> "LiveServer":
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        sock: socket.socket = self.server.servers[0].sockets[0]
        self.url = f"http://127.0.0.1:{sock.getsockname()[1]}"
        return self

    def __exit__(self, *exc) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture()
def live_server(tmp_path):
    with LiveServer(tmp_path / "data") as server:
        yield server


@pytest.fixture(scope="module")
def module_server(tmp_path_factory):
    data_dir = tmp_path_factory.mktemp("server-data")
    with LiveServer(data_dir) as server:
        yield server


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in getattr(report, "nodeid", "") and report.when == "call":
                rows.append((report.nodeid.split("::")[-1], outcome == "passed"))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in sorted(rows):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")
