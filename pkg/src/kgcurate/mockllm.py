"""Tiny chat-completions mock server for tests and offline demos.

Speaks just enough of the wire protocol: POST JSON with a message list,
reply with ``choices[0].message.content``. The reply policy is pluggable.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional


def constant_reply(text: str) -> Callable[[str, int], str]:
    return lambda prompt, count: text


def make_handler(policy: Callable[[str, int], str], state: dict,
                 fail_statuses: Optional[list] = None):
    failures = list(fail_statuses or [])

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
            with state["lock"]:
                state["requests"] += 1
                state["last_headers"] = dict(self.headers)
                count = state["requests"]
                status = failures.pop(0) if failures else 200
            if status != 200:
                self.send_response(status)
                self.end_headers()
                return
            prompt = body.get("messages", [{}])[0].get("content", "")
            reply = policy(prompt, count)
            payload = json.dumps(
                {"choices": [{"message": {"role": "assistant", "content": reply}}]})
            data = payload.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler


class MockChatServer:
    """Threaded mock endpoint; use as a context manager."""

    def __init__(self, policy: Callable[[str, int], str] = constant_reply("True"),
                 fail_statuses: Optional[list] = None):
        self.state = {"requests": 0, "lock": threading.Lock()}
        handler = make_handler(policy, self.state, fail_statuses)
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    @property
    def request_count(self) -> int:
        return self.state["requests"]

    @property
    def last_headers(self) -> dict:
        return self.state.get("last_headers", {})

    def __enter__(self) -> "MockChatServer":
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        return False
