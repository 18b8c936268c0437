"""Wire-protocol HTTP server over the student and verifier models.

Model access is serialized behind one lock; the protocol guarantees the
engine relies on (schema shape, validity range, per-call purity given the
request seed) hold for every endpoint. Malformed requests get a 400 with
an error body and the server keeps running.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import SidecarConfig
from .student import StudentModel
from .verifier import VerifierModel


def _load_student(identifier: str, deterministic: bool) -> StudentModel:
    if identifier.startswith("builtin:"):
        return StudentModel.builtin(int(identifier.split(":", 1)[1]), deterministic)
    return StudentModel.load(Path(identifier), deterministic)


def _load_verifier(identifier: str) -> VerifierModel:
    if identifier.startswith("builtin:"):
        return VerifierModel.builtin(int(identifier.split(":", 1)[1]))
    return VerifierModel.load(Path(identifier))


class _RequestError(ValueError):
    pass


def _require(payload: dict, field: str):
    if field not in payload:
        raise _RequestError(f"request is missing required field {field!r}")
    return payload[field]


class _Handler(BaseHTTPRequestHandler):
    student: StudentModel
    verifier: VerifierModel
    completion: StudentModel
    lock: threading.Lock

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
                raise _RequestError("request body must be a JSON object")
            route = {
                "/v1/propose": self._propose,
                "/v1/loglik": self._loglik,
                "/v1/verify": self._verify,
                "/v1/complete": self._complete,
            }.get(self.path)
            if route is None:
                self._reply(404, {"error": f"unknown path {self.path}"})
                return
            with self.lock:
                self._reply(200, route(payload))
        except (_RequestError, ValueError, KeyError, TypeError) as exc:
            self._reply(400, {"error": str(exc)})

    def _context(self, payload: dict) -> list[int]:
        return self.student.context_ids(
            goal=str(_require(payload, "goal")),
            condition=payload.get("condition"),
            initial_plan=payload.get("initial_plan"),
        )

    def _propose(self, payload: dict) -> dict:
        prefix = [str(s) for s in _require(payload, "prefix_steps")]
        n = int(_require(payload, "n"))
        if n < 1:
            raise _RequestError("n must be >= 1")
        method = _require(payload, "method")
        kind = str(_require(method, "kind"))
        if kind not in ("greedy", "beam", "nucleus"):
            raise _RequestError(f"unknown method kind {kind!r}")
        candidates = self.student.propose(
            self._context(payload),
            prefix,
            n,
            kind,
            method.get("top_p"),
            method.get("temperature"),
            int(method.get("seed", 0)),
        )
        return {"candidates": candidates}

    def _loglik(self, payload: dict) -> dict:
        steps = [str(s) for s in _require(payload, "steps")]
        logprob, tokens = self.student.loglik(self._context(payload), steps)
        return {"logprob_sum": logprob, "token_count": tokens}

    def _verify(self, payload: dict) -> dict:
        goal = str(_require(payload, "goal"))
        prefix = [str(s) for s in _require(payload, "prefix_steps")]
        candidate = str(_require(payload, "candidate_step"))
        return {"validity": self.verifier.validity(goal, prefix, candidate)}

    def _complete(self, payload: dict) -> dict:
        text = self.completion.complete(
            prompt=str(_require(payload, "prompt")),
            max_tokens=int(payload.get("max_tokens", 256)),
            top_p=float(payload.get("top_p", 0.9)),
            temperature=float(payload.get("temperature", 1.0)),
            seed=int(payload.get("seed", 0)),
        )
        return {"text": text}


class SidecarServer:
    """Threaded server; models load at construction time."""

    def __init__(self, config: SidecarConfig = SidecarConfig()):
        if config.device != "cpu":
            raise ValueError("only cpu inference is supported")
        student = _load_student(config.student, config.deterministic)
        verifier = _load_verifier(config.verifier)
        completion = (
            _load_student(config.completion, config.deterministic)
            if config.completion
            else student
        )
        handler = type(
            "BoundHandler",
            (_Handler,),
            {
                "student": student,
                "verifier": verifier,
                "completion": completion,
                "lock": threading.Lock(),
            },
        )
        self._server = ThreadingHTTPServer((config.host, config.port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "SidecarServer":
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
        self._server.server_close()

    def __enter__(self) -> "SidecarServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def serve(config: SidecarConfig) -> SidecarServer:
    """Start a server thread and return it; raises if models cannot load."""
    return SidecarServer(config).start()
