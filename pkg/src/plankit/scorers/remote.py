"""HTTP client for the scorer wire protocol.

All endpoints take and return JSON bodies. Responses are validated against
the documented schemas before being handed to the engine; out-of-range or
malformed values raise ``ProtocolError`` naming the offending field.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Any, Sequence

import requests

from ..core import PlanningInstance, Step
from ..errors import ProtocolError, ScorerUnavailableError
from .base import DecodingMethod, ScorerBundle, StepCandidate


@dataclass(frozen=True)
class RetryPolicy:
    """Transport retry behaviour: ``attempts`` tries with exponential backoff."""

    attempts: int = 3
    backoff_s: float = 0.25
    multiplier: float = 2.0


def _instance_payload(instance: PlanningInstance) -> dict:
    payload: dict = {"task": instance.kind.value, "goal": instance.goal.text}
    if instance.condition is not None:
        payload["condition"] = instance.condition.text
    if instance.initial_plan is not None:
        payload["initial_plan"] = list(instance.initial_plan.step_texts)
    return payload


def _texts(steps: Sequence[str | Step]) -> list[str]:
    return [s.text if isinstance(s, Step) else s for s in steps]


class RemoteScorerClient:
    """Thread-safe client for one scorer endpoint."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retry: RetryPolicy = RetryPolicy(),
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retry = retry
        self._session = session or requests.Session()

    def close(self) -> None:
        self._session.close()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.endpoint}{path}"
        delay = self.retry.backoff_s
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            try:
                response = self._session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = ScorerUnavailableError(
                        f"{url} answered {response.status_code}"
                    )
                elif response.status_code != 200:
                    raise ProtocolError(
                        f"{url} answered {response.status_code}: {response.text[:200]}"
                    )
                else:
                    try:
                        body = response.json()
                    except ValueError as exc:
                        raise ProtocolError(f"{url} returned a non-JSON body") from exc
                    if not isinstance(body, dict):
                        raise ProtocolError(f"{url} returned a non-object body")
                    return body
            if attempt + 1 < self.retry.attempts:
                time.sleep(delay)
                delay *= self.retry.multiplier
        raise ScorerUnavailableError(
            f"scorer unavailable after {self.retry.attempts} attempts: {url} ({last_error})"
        )

    def propose(
        self,
        instance: PlanningInstance,
        prefix: Sequence[str | Step],
        n: int,
        method: DecodingMethod,
    ) -> list[StepCandidate]:
        payload = _instance_payload(instance)
        payload.update({"prefix_steps": _texts(prefix), "n": int(n), "method": method.to_wire()})
        body = self._post("/v1/propose", payload)
        raw = body.get("candidates")
        if not isinstance(raw, list):
            raise ProtocolError("propose response is missing 'candidates'", field="candidates")
        if len(raw) > n:
            raise ProtocolError(
                f"propose returned {len(raw)} candidates for n={n}", field="candidates"
            )
        candidates = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                raise ProtocolError(f"candidate {i} is not an object", field="candidates")
            try:
                candidates.append(
                    StepCandidate(
                        text=str(item["text"]),
                        logprob_sum=float(item["logprob_sum"]),
                        token_count=int(item["token_count"]),
                        terminal=bool(item.get("terminal", False)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"candidate {i} is malformed: {exc}", field="candidates") from exc
        return candidates

    def loglik(
        self, instance: PlanningInstance, steps: Sequence[str | Step]
    ) -> tuple[float, int]:
        payload = _instance_payload(instance)
        payload["steps"] = _texts(steps)
        body = self._post("/v1/loglik", payload)
        try:
            logprob = float(body["logprob_sum"])
            tokens = int(body["token_count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"loglik response is malformed: {exc}", field="logprob_sum") from exc
        if not math.isfinite(logprob):
            raise ProtocolError("loglik response is not finite", field="logprob_sum")
        return logprob, tokens

    def verify(self, goal: str, prefix: Sequence[str | Step], candidate: str) -> float:
        payload = {"goal": goal, "prefix_steps": _texts(prefix), "candidate_step": candidate}
        body = self._post("/v1/verify", payload)
        try:
            validity = float(body["validity"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"verify response is malformed: {exc}", field="validity") from exc
        if not (0.0 <= validity <= 1.0):
            raise ProtocolError(f"validity {validity} outside [0, 1]", field="validity")
        return validity

    def complete(self, prompt: str, params: Any) -> str:
        payload = {
            "prompt": prompt,
            "max_tokens": int(getattr(params, "max_tokens", 256)),
            "top_p": float(getattr(params, "top_p", 1.0)),
            "temperature": float(getattr(params, "temperature", 1.0)),
            "seed": int(getattr(params, "seed", 0)),
        }
        body = self._post("/v1/complete", payload)
        text = body.get("text")
        if not isinstance(text, str):
            raise ProtocolError("complete response is missing 'text'", field="text")
        return text


def remote_bundle(
    endpoint: str, timeout: float = 30.0, retry: RetryPolicy = RetryPolicy()
) -> ScorerBundle:
    """Scorer bundle transported over the wire protocol."""
    client = RemoteScorerClient(endpoint, timeout=timeout, retry=retry)
    return ScorerBundle(
        proposer=client.propose,
        likelihood=client.loglik,
        verifier=client.verify,
        completion=client.complete,
        close=client.close,
    )
