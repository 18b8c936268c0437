"""Verifier-guided step-wise plan decoding and its surrounding pipeline:
data generation, critic curation, verifier training pairs, and an embodied
evaluation harness."""

__version__ = "0.1.0"

from .core import (
    Condition,
    ConditionCategory,
    Goal,
    Plan,
    PlanningInstance,
    Step,
    TaskKind,
    parse_plan,
    render_template,
)
from .decoder import DecodeParams, Hypothesis, decode, decode_batch, select_top_k, value
from .errors import (
    FixtureError,
    ParseError,
    PlankitError,
    ProtocolError,
    ScorerUnavailableError,
    ValidationError,
)

__all__ = [
    "__version__",
    "Condition",
    "ConditionCategory",
    "Goal",
    "Plan",
    "PlanningInstance",
    "Step",
    "TaskKind",
    "parse_plan",
    "render_template",
    "DecodeParams",
    "Hypothesis",
    "decode",
    "decode_batch",
    "select_top_k",
    "value",
    "PlankitError",
    "ValidationError",
    "ParseError",
    "FixtureError",
    "ProtocolError",
    "ScorerUnavailableError",
]
