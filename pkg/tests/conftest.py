import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


def chat_response(text, token_probs=None, top=None):
    """A chat-completions body; ``top`` maps tokens to probabilities at position 0."""
    choice = {"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}
    if token_probs is not None:
        pieces = text.split() if len(token_probs) > 1 else [text]
        content = []
        for i, p in enumerate(token_probs):
            entry = {"token": pieces[i] if i < len(pieces) else "", "logprob": math.log(p)}
            if i == 0 and top is not None:
                entry["top_logprobs"] = [{"token": t, "logprob": math.log(q)} for t, q in top.items()]
            content.append(entry)
        choice["logprobs"] = {"content": content}
    return {"id": "x", "object": "chat.completion", "choices": [choice]}


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802
        server = self.server
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        with server.lock:
            server.received.append({"path": self.path, "body": body, "headers": dict(self.headers)})
            status, payload = server.script.pop(0) if server.script else (500, {"error": "script exhausted"})
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


class StubServer:
    """Replays scripted ``(status, json)`` responses in order."""

    def __init__(self):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.script = []
        self.httpd.received = []
        self.httpd.lock = threading.Lock()
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base_url(self):
        return f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"

    @property
    def received(self):
        return self.httpd.received

    def queue(self, *responses):
        self.httpd.script.extend(responses)

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()


ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = "test_acceptance.py::test_criterion_"
    if marker in report.nodeid:
        number = int(report.nodeid.split(marker)[1].split("_")[0])
        ACCEPTANCE_RESULTS[number] = (report.passed, report.nodeid.split("::")[-1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, name = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}  {name}")
