"""Shared fixtures: tiny corpora, constructed backend worlds, an HTTP stub."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from promptmt.corpus import (
    DE,
    EN,
    ZH,
    ExamplePool,
    LanguagePair,
    ParallelExample,
    PoolTier,
)

DATA_DIR = Path(__file__).parent / "data"

DE_EN = LanguagePair(DE, EN)
EN_ZH = LanguagePair(EN, ZH)


@pytest.fixture
def de_en() -> LanguagePair:
    return DE_EN


def make_example(i: int, pair: LanguagePair = DE_EN, src_words: int = 3, tgt_words: int = 3):
    src = " ".join([f"quell{i:03d}"] + [f"wort{j}" for j in range(src_words - 1)])
    tgt = " ".join([f"targ{i:03d}"] + [f"word{j}" for j in range(tgt_words - 1)])
    return ParallelExample(f"e{i:03d}", src, tgt, pair)


def make_pool(n: int, pair: LanguagePair = DE_EN, tier=PoolTier.HIGH_QUALITY, **kwargs):
    return ExamplePool(pair, tier, tuple(make_example(i, pair, **kwargs) for i in range(n)))


def echo_rule(examples):
    """Rule backend body: return the reference of the test example whose
    source occurs last in the prompt (the test block)."""
    pairs = [(ex.source_text, ex.target_text) for ex in examples]

    def rule(prompt: str) -> str:
        best, best_pos = None, -1
        for src, tgt in pairs:
            pos = prompt.rfind(src)
            if pos > best_pos:
                best_pos, best = pos, tgt
        if best is None:
            raise AssertionError(f"no known source in prompt: {prompt!r}")
        return best

    return rule


class _StubHandler(BaseHTTPRequestHandler):
    server_version = "stub/0"

    def log_message(self, *args):  # keep test output quiet
        pass

    def _reply(self, status: int, body: dict) -> None:
        raw = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length)) if length else {}
        handler = self.server.routes.get(("POST", self.path))
        if handler is None:
            self._reply(404, {"error": "no such route"})
            return
        status, body = handler(payload)
        self._reply(status, body)

    def do_GET(self):
        handler = self.server.routes.get(("GET", self.path))
        if handler is None:
            self._reply(404, {"error": "no such route"})
            return
        status, body = handler({})
        self._reply(status, body)


class StubServer:
    """Tiny canned-response HTTP server for client tests."""

    def __init__(self):
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self._server.routes = {}
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def route(self, method: str, path: str, handler) -> None:
        self._server.routes[(method, path)] = handler

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def start(self) -> "StubServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    server = StubServer().start()
    yield server
    server.stop()


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {status}: {name}")
