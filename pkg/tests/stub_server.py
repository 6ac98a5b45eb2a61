"""Tiny chat-completions stub: replies from a queue of (status, content) pairs."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional


class StubServer:
    def __init__(self, replies: list[tuple[int, str]], fallback: Optional[Callable[[dict], str]] = None):
        self.replies = list(replies)
        self.fallback = fallback
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with stub._lock:
                    stub.requests.append(body)
                    stub.headers.append(dict(self.headers))
                    status, content = stub.replies.pop(0) if stub.replies else (200, None)
                if content is None:
                    content = stub.fallback(body) if stub.fallback else ""
                payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})
                if status != 200:
                    payload = json.dumps({"error": "injected failure"})
                data = payload.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def __enter__(self) -> "StubServer":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
