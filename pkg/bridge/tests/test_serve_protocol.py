"""Protocol behaviour of the serve loop, driven over real pipes."""

from __future__ import annotations

import json
import subprocess
import sys

from conftest import bridge_cmd


class ServeSession:
    def __init__(self, *args: str):
        self.proc = subprocess.Popen(
            bridge_cmd("serve", *args),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self.ready = json.loads(self.proc.stdout.readline())

    def send_line(self, line: str) -> dict:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        return json.loads(self.proc.stdout.readline())

    def request(self, request_id: int, context: str) -> dict:
        return self.send_line(json.dumps({"id": request_id, "context": context}))

    def close(self) -> int:
        self.proc.stdin.close()
        return self.proc.wait(timeout=20)


def test_echo_announces_ready_then_echoes():
    session = ServeSession("--echo")
    try:
        assert session.ready == {"type": "ready", "version": 1}
        response = session.request(0, "<start> go go go <end>")
        assert response == {"id": 0, "commentary": "<start> go go go <end>"}
        response = session.request(1, "")
        assert response == {"id": 1, "commentary": ""}
    finally:
        assert session.close() == 0


def test_malformed_line_reports_error_and_continues():
    session = ServeSession("--echo")
    try:
        error = session.send_line("this is not json")
        assert error["id"] == -1
        assert "error" in error
        error = session.send_line(json.dumps({"id": "zero", "context": "x"}))
        assert error["id"] == -1
        response = session.request(5, "still alive")
        assert response == {"id": 5, "commentary": "still alive"}
    finally:
        assert session.close() == 0


def test_eof_exits_cleanly():
    session = ServeSession("--echo")
    assert session.close() == 0


def test_serve_without_model_or_echo_fails():
    result = subprocess.run(bridge_cmd("serve"), capture_output=True, text=True)
    assert result.returncode != 0


def test_model_serving_is_deterministic_within_and_across_sessions(base_bundle):
    context = "<start> the blue team moves to the baron now they commit <end>"
    first = ServeSession(str(base_bundle))
    try:
        a = first.request(0, context)["commentary"]
        b = first.request(1, context)["commentary"]
    finally:
        first.close()
    second = ServeSession(str(base_bundle))
    try:
        c = second.request(0, context)["commentary"]
    finally:
        second.close()
    assert a == b == c


def test_model_serving_answers_matching_ids(base_bundle):
    session = ServeSession(str(base_bundle))
    try:
        for request_id in (3, 9, 27):
            response = session.request(request_id, "the red team moves out")
            assert response["id"] == request_id
            assert isinstance(response["commentary"], str)
    finally:
        session.close()
