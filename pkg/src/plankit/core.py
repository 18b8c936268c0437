"""Domain types for goals, plans, conditions, and the task prompt templates.

The textual surface format is line oriented: one ``Step k: <text>`` line per
plan step. Template rendering is deterministic and injective over distinct
inputs, which the decoder relies on for reproducibility. Texts are trimmed
and may not contain newlines so that the line format stays unambiguous.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

_STEP_LINE = re.compile(r"^Step\s+(\d+):\s*(\S.*?)\s*$")
_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Lowercase and collapse whitespace; used for dedup and equality checks."""
    return _WS.sub(" ", text.strip().lower())


def _clean_text(value: str, field_name: str) -> str:
    if not isinstance(value, str):
        raise ValidationError(f"{field_name} must be a string")
    if "\n" in value or "\r" in value:
        raise ValidationError(f"{field_name} must not contain newlines")
    text = value.strip()
    if not text:
        raise ValidationError(f"{field_name} must be non-empty")
    return text


@dataclass(frozen=True)
class Goal:
    """A high-level goal to be decomposed into a plan."""

    text: str
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "text", _clean_text(self.text, "goal text"))
        if not self.id:
            digest = hashlib.sha1(normalize_text(self.text).encode("utf-8")).hexdigest()
            object.__setattr__(self, "id", f"g{digest[:10]}")


@dataclass(frozen=True)
class Step:
    """One plan step with its 1-based position."""

    text: str
    index: int

    def __post_init__(self):
        object.__setattr__(self, "text", _clean_text(self.text, "step text"))
        if self.index < 1:
            raise ValidationError(f"step index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Plan:
    """An ordered sequence of steps; ``terminal`` marks a finished plan."""

    steps: tuple[Step, ...]
    terminal: bool = True

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        for pos, step in enumerate(steps, start=1):
            if step.index != pos:
                raise ValidationError(
                    f"step indices must be contiguous from 1; position {pos} has index {step.index}"
                )
        if self.terminal and not steps:
            raise ValidationError("a terminal plan must have at least one step")

    @classmethod
    def from_texts(cls, texts: Iterable[str], terminal: bool = True) -> "Plan":
        steps = tuple(Step(text, i) for i, text in enumerate(texts, start=1))
        return cls(steps, terminal)

    @property
    def step_texts(self) -> tuple[str, ...]:
        return tuple(s.text for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


class ConditionCategory(str, Enum):
    LOCATION = "location"
    EQUIPMENT = "equipment"
    SAFETY = "safety"
    USER_SPECIFICATION = "user-specification"
    OTHER = "other"


@dataclass(frozen=True)
class Condition:
    """A constraining condition. Category is metadata and never rendered."""

    text: str
    category: ConditionCategory | None = None

    def __post_init__(self):
        object.__setattr__(self, "text", _clean_text(self.text, "condition text"))
        if self.category is not None and not isinstance(self.category, ConditionCategory):
            object.__setattr__(self, "category", ConditionCategory(self.category))


class TaskKind(str, Enum):
    PLANNING = "planning"
    COUNTERFACTUAL_PLANNING = "counterfactual-planning"
    COUNTERFACTUAL_REVISION = "counterfactual-revision"

    @property
    def requires_condition(self) -> bool:
        return self is not TaskKind.PLANNING

    @property
    def requires_initial_plan(self) -> bool:
        return self is TaskKind.COUNTERFACTUAL_REVISION


@dataclass(frozen=True)
class PlanningInstance:
    """A single task input: goal plus the optional fields its kind demands.

    Optional fields must be present exactly when the task kind requires
    them; anything else raises a validation error naming the field.
    """

    kind: TaskKind
    goal: Goal
    condition: Condition | None = None
    initial_plan: Plan | None = None

    def __post_init__(self):
        kind = TaskKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.requires_condition and self.condition is None:
            raise ValidationError(f"missing required field 'condition' for task kind {kind.value}")
        if not kind.requires_condition and self.condition is not None:
            raise ValidationError(f"unexpected field 'condition' for task kind {kind.value}")
        if kind.requires_initial_plan and self.initial_plan is None:
            raise ValidationError(
                f"missing required field 'initial_plan' for task kind {kind.value}"
            )
        if not kind.requires_initial_plan and self.initial_plan is not None:
            raise ValidationError(f"unexpected field 'initial_plan' for task kind {kind.value}")


def render_template(instance: PlanningInstance, prefix: Sequence[Step] = ()) -> str:
    """Render the canonical prompt for ``instance`` with ``prefix`` steps filled in.

    The rendering ends with the header of the next step to be generated
    ("Step t:"), ready for a step proposer. Equal inputs produce byte
    identical output.
    """
    lines = [f"Goal: {instance.goal.text}"]
    if instance.condition is not None:
        lines.append(f"Condition: {instance.condition.text}")
    if instance.initial_plan is not None:
        lines.append("Initial plan:")
        lines.extend(f"Step {s.index}: {s.text}" for s in instance.initial_plan.steps)
        lines.append("Revised plan:")
    for pos, step in enumerate(prefix, start=1):
        lines.append(f"Step {pos}: {step.text}")
    lines.append(f"Step {len(prefix) + 1}:")
    return "\n".join(lines)


def parse_plan(text: str, terminal: bool = False) -> Plan:
    """Parse ``Step k: ...`` lines into a plan.

    Steps are returned in ascending k and reindexed to 1..T. Lines that do
    not match the step format are ignored; duplicate step numbers raise a
    parse error listing the offenders.
    """
    found: list[tuple[int, str]] = []
    for line in text.splitlines():
        match = _STEP_LINE.match(line)
        if match:
            found.append((int(match.group(1)), match.group(2)))
    numbers = [k for k, _ in found]
    duplicates = sorted({k for k in numbers if numbers.count(k) > 1})
    if duplicates:
        raise ParseError(f"duplicate step numbers: {duplicates}")
    found.sort(key=lambda kv: kv[0])
    if not found:
        return Plan((), terminal=False)
    return Plan.from_texts((content for _, content in found), terminal=terminal)


def _condition_to_field(condition: Condition):
    if condition.category is None:
        return condition.text
    return {"text": condition.text, "category": condition.category.value}


def _condition_from_field(value) -> Condition:
    if isinstance(value, str):
        return Condition(value)
    if isinstance(value, dict):
        return Condition(value["text"], value.get("category"))
    raise ValidationError(f"unsupported condition value: {value!r}")


def instance_to_record(
    instance: PlanningInstance, plan: Plan | None = None, record_id: str | None = None
) -> dict:
    """Serialize an instance (and optionally its plan) to the interchange record."""
    record: dict = {
        "id": record_id if record_id is not None else instance.goal.id,
        "kind": instance.kind.value,
        "goal": instance.goal.text,
    }
    if instance.condition is not None:
        record["condition"] = _condition_to_field(instance.condition)
    if instance.initial_plan is not None:
        record["initial_plan"] = list(instance.initial_plan.step_texts)
    if plan is not None:
        record["plan"] = list(plan.step_texts)
    return record


def record_to_instance(record: dict) -> tuple[PlanningInstance, Plan | None]:
    """Inverse of :func:`instance_to_record`."""
    try:
        kind = TaskKind(record["kind"])
        goal = Goal(record["goal"], record.get("id", ""))
    except KeyError as exc:
        raise ValidationError(f"record missing required field {exc.args[0]!r}") from exc
    condition = _condition_from_field(record["condition"]) if "condition" in record else None
    initial = (
        Plan.from_texts(record["initial_plan"], terminal=True)
        if "initial_plan" in record
        else None
    )
    instance = PlanningInstance(kind, goal, condition, initial)
    plan = Plan.from_texts(record["plan"], terminal=True) if record.get("plan") else None
    return instance, plan


def write_instances(path: str | Path, items: Iterable[tuple[PlanningInstance, Plan | None]]) -> int:
    """Write one UTF-8 JSON record per line; returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for instance, plan in items:
            handle.write(json.dumps(instance_to_record(instance, plan), ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def read_instances(path: str | Path) -> list[tuple[PlanningInstance, Plan | None]]:
    """Read instance records, enforcing unique ids within the file."""
    items: list[tuple[PlanningInstance, Plan | None]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            record_id = record.get("id")
            if record_id in seen:
                raise ValidationError(f"duplicate record id {record_id!r} at line {lineno}")
            if record_id is not None:
                seen.add(record_id)
            items.append(record_to_instance(record))
    return items
