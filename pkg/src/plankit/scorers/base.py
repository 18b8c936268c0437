"""Abstract scoring contracts shared by mock, remote, and sidecar implementations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from ..core import PlanningInstance, Step
from ..errors import ValidationError

METHOD_KINDS = ("greedy", "beam", "nucleus")

# Tolerance for "log-probability sums are non-positive" checks; guards against
# rounding when a probability is exactly 1.
_LOGPROB_TOL = 1e-9


@dataclass(frozen=True)
class DecodingMethod:
    """How the proposer should generate next-step candidates.

    Parameters must be present exactly for the kind that uses them:
    ``beam_width`` for beam, ``top_p`` and ``temperature`` for nucleus.
    """

    kind: str
    beam_width: int | None = None
    top_p: float | None = None
    temperature: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValidationError(f"unknown decoding method kind {self.kind!r}")
        if self.kind == "beam":
            if self.beam_width is None or self.beam_width < 1:
                raise ValidationError("beam method requires beam_width >= 1")
        elif self.beam_width is not None:
            raise ValidationError(f"beam_width is only valid for beam, not {self.kind}")
        if self.kind == "nucleus":
            if self.top_p is None or not (0.0 < self.top_p <= 1.0):
                raise ValidationError("nucleus method requires top_p in (0, 1]")
            if self.temperature is None or self.temperature <= 0.0:
                raise ValidationError("nucleus method requires temperature > 0")
        else:
            if self.top_p is not None or self.temperature is not None:
                raise ValidationError(f"top_p/temperature are only valid for nucleus, not {self.kind}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must fit in an unsigned 64-bit integer")

    @classmethod
    def greedy(cls, seed: int = 0) -> "DecodingMethod":
        return cls("greedy", seed=seed)

    @classmethod
    def beam(cls, beam_width: int, seed: int = 0) -> "DecodingMethod":
        return cls("beam", beam_width=beam_width, seed=seed)

    @classmethod
    def nucleus(cls, top_p: float = 0.9, temperature: float = 1.0, seed: int = 0) -> "DecodingMethod":
        return cls("nucleus", top_p=top_p, temperature=temperature, seed=seed)

    def to_wire(self) -> dict:
        payload: dict = {"kind": self.kind, "seed": int(self.seed)}
        if self.beam_width is not None:
            payload["beam_width"] = self.beam_width
        if self.top_p is not None:
            payload["top_p"] = self.top_p
        if self.temperature is not None:
            payload["temperature"] = self.temperature
        return payload

    @classmethod
    def from_wire(cls, payload: dict) -> "DecodingMethod":
        if not isinstance(payload, dict) or "kind" not in payload:
            raise ValidationError("method payload must be an object with a 'kind' field")
        return cls(
            payload["kind"],
            beam_width=payload.get("beam_width"),
            top_p=payload.get("top_p"),
            temperature=payload.get("temperature"),
            seed=payload.get("seed", 0),
        )


@dataclass(frozen=True)
class StepCandidate:
    """One proposed next step with its natural-log probability mass.

    A candidate with ``terminal`` set marks end of plan; its text is empty
    and the decoder treats it as a completion signal rather than a step.
    """

    text: str
    logprob_sum: float
    token_count: int
    terminal: bool = False

    def __post_init__(self):
        if not math.isfinite(self.logprob_sum):
            raise ValidationError("candidate logprob_sum must be finite")
        if self.logprob_sum > _LOGPROB_TOL:
            raise ValidationError(f"candidate logprob_sum must be <= 0, got {self.logprob_sum}")
        if self.token_count < 1:
            raise ValidationError("candidate token_count must be >= 1")
        if not self.terminal and not self.text.strip():
            raise ValidationError("non-terminal candidate must have non-empty text")
        if "\n" in self.text or "\r" in self.text:
            raise ValidationError("candidate text must not contain newlines")


Proposer = Callable[[PlanningInstance, Sequence[Step], int, DecodingMethod], list[StepCandidate]]
Likelihood = Callable[[PlanningInstance, Sequence[Step]], tuple[float, int]]
Verifier = Callable[[str, Sequence[str], str], float]
Completion = Callable[[str, Any], str]


@dataclass
class ScorerBundle:
    """The model-facing interfaces used by the engine.

    All callables must be pure given their inputs (including any seed) and
    safe for concurrent invocation. ``completion`` is only used by the data
    generation pipeline and may be None elsewhere.
    """

    proposer: Proposer
    likelihood: Likelihood
    verifier: Verifier
    completion: Completion | None = None
    close: Callable[[], None] | None = field(default=None, repr=False)
