"""Loopback HTTP server exposing a mock world over the scorer wire protocol.

Responses are computed by the same functions as the in-process bundle, so a
decode through this server is byte-identical to an in-process decode.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import PlankitError
from .base import DecodingMethod
from .mockworld import MockWorld, mock_complete, mock_likelihood, mock_propose


def _require(payload: dict, field: str):
    if field not in payload:
        raise PlankitError(f"request is missing required field {field!r}")
    return payload[field]


class _Handler(BaseHTTPRequestHandler):
    world: MockWorld  # set on the generated subclass

    # Silence per-request logging; the server is a test fixture.
    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):  # noqa: N802 - stdlib casing
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
            if not isinstance(payload, dict):
                raise PlankitError("request body must be a JSON object")
            handler = {
                "/v1/propose": self._propose,
                "/v1/loglik": self._loglik,
                "/v1/verify": self._verify,
                "/v1/complete": self._complete,
            }.get(self.path)
            if handler is None:
                self._reply(404, {"error": f"unknown path {self.path}"})
                return
            self._reply(200, handler(payload))
        except (PlankitError, ValueError, KeyError, TypeError) as exc:
            self._reply(400, {"error": str(exc)})

    def _propose(self, payload: dict) -> dict:
        prefix = _require(payload, "prefix_steps")
        n = int(_require(payload, "n"))
        method = DecodingMethod.from_wire(_require(payload, "method"))
        candidates = mock_propose(self.world, prefix, n, method)
        return {
            "candidates": [
                {
                    "text": c.text,
                    "logprob_sum": c.logprob_sum,
                    "token_count": c.token_count,
                    "terminal": c.terminal,
                }
                for c in candidates
            ]
        }

    def _loglik(self, payload: dict) -> dict:
        logprob, tokens = mock_likelihood(self.world, _require(payload, "steps"))
        return {"logprob_sum": logprob, "token_count": tokens}

    def _verify(self, payload: dict) -> dict:
        prefix = tuple(_require(payload, "prefix_steps"))
        candidate = _require(payload, "candidate_step")
        return {"validity": self.world.validity(prefix, candidate)}

    def _complete(self, payload: dict) -> dict:
        prompt = _require(payload, "prompt")

        class _Params:
            top_p = float(payload.get("top_p", 1.0))
            temperature = float(payload.get("temperature", 1.0))
            seed = int(payload.get("seed", 0))
            max_tokens = int(payload.get("max_tokens", 256))

        return {"text": mock_complete(self.world, prompt, _Params())}


class MockScorerServer:
    """Threaded wire-protocol server backed by a mock world."""

    def __init__(self, world: MockWorld, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"world": world})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockScorerServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def close(self) -> None:
        """Release the socket after a blocking serve_forever returns."""
        self._server.server_close()

    def __enter__(self) -> "MockScorerServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
