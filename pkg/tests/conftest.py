from __future__ import annotations

import json
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from threading import Thread

import pytest

from hetsched.scenario import builtin_scenario
from hetsched.semantics import SimMode, simulate

BUILTIN_NODES = ["NodeA", "NodeB", "NodeC"]

# Table-style frozen expectations for the nine builtin assignments, keyed by
# (Task2 node, Task4 node).  Transfer columns are seconds for the edges
# Task1->Task2, Task2->Task4, Task3->Task4; times are milliseconds.
TABLE_ROWS = {
    ("NodeA", "NodeA"): ((0, 0, 80), 18_080_000, 32_480_000),
    ("NodeA", "NodeB"): ((0, 8, 80), 18_080_000, 32_480_000),
    ("NodeA", "NodeC"): ((0, 20, 0), 18_020_000, 32_420_000),
    ("NodeB", "NodeA"): ((16, 8, 80), 18_080_000, 32_480_000),
    ("NodeB", "NodeB"): ((16, 0, 80), 18_080_000, 32_480_000),
    ("NodeB", "NodeC"): ((16, 20, 0), 18_036_000, 32_436_000),
    ("NodeC", "NodeA"): ((40, 20, 80), 18_080_000, 32_480_000),
    ("NodeC", "NodeB"): ((40, 20, 80), 18_080_000, 32_480_000),
    ("NodeC", "NodeC"): ((40, 0, 0), 18_040_000, 32_440_000),
}

# capacity-aware makespans recomputed by tests/timeline_oracle.py
AWARE_MAKESPANS = {
    ("NodeC", "NodeA"): 39_620_000,
    ("NodeC", "NodeB"): 39_620_000,
    ("NodeC", "NodeC"): 39_600_000,
}

OPTIMUM_MS = 32_420_000
OPTIMAL_ASSIGNMENT = {
    "Task1": "NodeA",
    "Task2": "NodeA",
    "Task3": "NodeC",
    "Task4": "NodeC",
}


def builtin_assignment(t2: str, t4: str) -> dict[str, str]:
    return {"Task1": "NodeA", "Task2": t2, "Task3": "NodeC", "Task4": t4}


def all_builtin_assignments():
    return [
        builtin_assignment(t2, t4) for t2 in BUILTIN_NODES for t4 in BUILTIN_NODES
    ]


def fixture_text(name: str) -> str:
    return (
        resources.files("hetsched").joinpath(f"data/fixtures/{name}").read_text("utf-8")
    )


@pytest.fixture
def builtin():
    return builtin_scenario()


@pytest.fixture
def optimal_schedule(builtin):
    return simulate(OPTIMAL_ASSIGNMENT, builtin, SimMode.CAPACITY_AWARE)


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        self.server.requests.append(body)
        behavior = self.server.behaviors.get(body.get("model"))
        if behavior is None:
            self._reply(404, {"error": "unknown model"})
            return
        if "sleep_s" in behavior:
            time.sleep(behavior["sleep_s"])
        status = behavior.get("status", 200)
        if "payload" in behavior:
            payload = behavior["payload"]
        else:
            payload = {"choices": [{"message": {"content": behavior["text"]}}]}
        self._reply(status, payload)

    def _reply(self, status: int, payload: dict):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        try:
            self.wfile.write(data)
        except OSError:
            pass  # client timed out first

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    """Start a local chat-completion stub; behaviors keyed by model name."""
    servers = []

    def start(behaviors: dict):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        server.behaviors = behaviors
        server.requests = []
        Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
        return server, url

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
