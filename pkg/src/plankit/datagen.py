"""Teacher-side data generation: randomized prompts, goal bootstrapping, and
condition/counterfactual sampling over a completion interface.

Prompt instruction wording is randomized over four fixed slots, giving
exactly 168 distinct instruction prefixes. The elicitation templates live
as text assets with named placeholders so alternative wordings can be
dropped in without code changes.
"""

from __future__ import annotations

import logging
import json
import random
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .core import Condition, ConditionCategory, Goal, Plan, normalize_text, parse_plan
from .errors import ParseError, PlankitError, ValidationError

logger = logging.getLogger(__name__)

W1 = ("For a given goal", "Given a goal")
W2 = ("write down", "break down into", "put down", "jot down")
W3 = (
    "steps",
    "subgoals",
    "a list of steps",
    "several steps",
    "several subgoals",
    "some steps",
    "some small steps",
)
W4 = ("to achieve the goal", "for achieving the goal", "to attain the goal")

PROMPT_SLOTS = (W1, W2, W3, W4)


def build_prefix(w1: str, w2: str, w3: str, w4: str) -> str:
    for value, options in zip((w1, w2, w3, w4), PROMPT_SLOTS):
        if value not in options:
            raise ValidationError(f"{value!r} is not a known instruction slot value")
    return f"{w1}, {w2} {w3} {w4}.\n\n"


def randomized_prefix(seed: int) -> str:
    """One instruction prefix drawn uniformly per slot from the fixed lists."""
    rng = random.Random(seed)
    return build_prefix(*(rng.choice(options) for options in PROMPT_SLOTS))


def all_prefixes() -> list[str]:
    """Every reachable instruction prefix (the full 2 x 4 x 7 x 3 product)."""
    return [
        build_prefix(w1, w2, w3, w4) for w1 in W1 for w2 in W2 for w3 in W3 for w4 in W4
    ]


@dataclass(frozen=True)
class SamplingParams:
    top_p: float = 0.98
    temperature: float = 0.9
    max_tokens: int = 256
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.top_p <= 1.0):
            raise ValidationError("top_p must be in (0, 1]")
        if self.temperature <= 0.0:
            raise ValidationError("temperature must be > 0")


@dataclass(frozen=True)
class PromptRecipe:
    """Fully specified few-shot prompt: instruction slots, exemplars, target."""

    w1: str
    w2: str
    w3: str
    w4: str
    in_context: tuple[tuple[Goal, Plan], ...]
    target_goal: Goal

    def __post_init__(self):
        build_prefix(self.w1, self.w2, self.w3, self.w4)
        if len(self.in_context) < 1:
            raise ValidationError("a prompt recipe needs at least one exemplar")

    @classmethod
    def sample(
        cls, exemplars: Sequence[tuple[Goal, Plan]], target_goal: Goal, seed: int
    ) -> "PromptRecipe":
        rng = random.Random(seed)
        return cls(
            w1=rng.choice(W1),
            w2=rng.choice(W2),
            w3=rng.choice(W3),
            w4=rng.choice(W4),
            in_context=tuple(exemplars),
            target_goal=target_goal,
        )


def _plan_block(goal: Goal, plan: Plan) -> str:
    if len(plan) < 1:
        raise ValidationError(f"exemplar plan for {goal.text!r} is empty")
    lines = [f"Goal: {goal.text}"]
    lines.extend(f"Step {s.index}: {s.text}" for s in plan.steps)
    return "\n".join(lines)


def assemble_prompt(recipe: PromptRecipe) -> str:
    """Instruction prefix, exemplar blocks, then the target goal header."""
    blocks = [_plan_block(goal, plan) for goal, plan in recipe.in_context]
    prefix = build_prefix(recipe.w1, recipe.w2, recipe.w3, recipe.w4)
    return prefix + "\n\n".join(blocks) + f"\n\nGoal: {recipe.target_goal.text}\nStep 1:"


PROVENANCES = ("seed", "generated", "exemplar")


@dataclass(frozen=True)
class PooledGoal:
    text: str
    provenance: str
    round: int


class GoalPool:
    """Deduplicated goal collection with provenance tracking.

    Texts are deduplicated after case and whitespace normalization; adding
    an already-known goal is a no-op, so deduplication is idempotent.
    """

    def __init__(self):
        self.entries: list[PooledGoal] = []
        self._keys: set[str] = set()
        self.rounds_run = 0

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, text: str, provenance: str = "seed", round_index: int = 0) -> bool:
        if provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {provenance!r}")
        cleaned = text.strip()
        if not cleaned or "\n" in cleaned:
            return False
        key = normalize_text(cleaned)
        if key in self._keys:
            return False
        self._keys.add(key)
        self.entries.append(PooledGoal(cleaned, provenance, round_index))
        return True

    def texts(self) -> list[str]:
        return [entry.text for entry in self.entries]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for entry in self.entries:
                record = {"text": entry.text, "provenance": entry.provenance, "round": entry.round}
                handle.write(json.dumps(record, ensure_ascii=False))
                handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "GoalPool":
        pool = cls()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                pool.add(record["text"], record.get("provenance", "seed"), record.get("round", 0))
        return pool


def load_template(name: str) -> str:
    """Load a prompt template asset; header lines above the first ``---`` are
    documentation and are stripped."""
    text = resources.files("plankit").joinpath(f"assets/templates/{name}").read_text("utf-8")
    marker = "\n---\n"
    if marker in text:
        text = text.split(marker, 1)[1]
    return text.lstrip("\n")


def _derive(seed: int, *parts) -> int:
    rng = random.Random(f"{seed}|" + "|".join(str(p) for p in parts))
    return rng.getrandbits(63)


def bootstrap_goals(
    pool: GoalPool,
    completion: Callable[[str, SamplingParams], str],
    rounds: int,
    batch: int,
    params: SamplingParams = SamplingParams(),
    exemplars_per_prompt: int = 5,
    template: str | None = None,
) -> GoalPool:
    """Iteratively grow the pool by prompting the completion interface.

    Each round issues ``batch`` prompts, each built from randomly chosen
    exemplar goals, parses one goal per completion line, and merges novel
    goals back in. A failed completion aborts that prompt only; the pool is
    never shrunk.
    """
    if len(pool) == 0:
        raise ValidationError("bootstrap requires a non-empty seed pool")
    tpl = template if template is not None else load_template("goal_bootstrap.txt")
    for round_offset in range(rounds):
        pool.rounds_run += 1
        round_index = pool.rounds_run
        snapshot = pool.texts()
        additions: list[str] = []
        for b in range(batch):
            rng = random.Random(_derive(params.seed, "bootstrap", round_index, b))
            exemplars = rng.sample(snapshot, min(exemplars_per_prompt, len(snapshot)))
            prompt = tpl.format(example_goals="\n".join(f"Goal: {g}" for g in exemplars))
            call_params = replace(params, seed=_derive(params.seed, "goals", round_index, b))
            try:
                text = completion(prompt, call_params)
            except PlankitError as exc:
                logger.warning("goal bootstrap round %d prompt %d failed: %s", round_index, b, exc)
                continue
            additions.extend(_parse_goal_lines(text))
        for goal_text in additions:
            pool.add(goal_text, "generated", round_index)
    return pool


def _parse_goal_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        line = re.sub(r"^(?:goal\s*:\s*|[-*]\s+|\d+[.)]\s+)", "", line, flags=re.IGNORECASE).strip()
        if line:
            out.append(line)
    return out


_CATEGORY_KEYWORDS: tuple[tuple[ConditionCategory, tuple[str, ...]], ...] = (
    (
        ConditionCategory.LOCATION,
        ("store", "shop", "nearby", "closed", "location", "at home", "studio", "outside", "far away"),
    ),
    (
        ConditionCategory.EQUIPMENT,
        ("tool", "equipment", "laptop", "computer", "clay", "chainsaw", "device", "sharp"),
    ),
    (
        ConditionCategory.SAFETY,
        ("heavy", "fragile", "breaks down", "too hot", "dangerous", "unsafe", "risk"),
    ),
    (
        ConditionCategory.USER_SPECIFICATION,
        ("you want", "you need", "unable", "you have", "prefer", "allerg", "disability", "injury"),
    ),
)


def categorize_condition(text: str) -> ConditionCategory:
    """Keyword heuristic mapping a condition to its nearest category family."""
    lowered = normalize_text(text)
    for category, keywords in _CATEGORY_KEYWORDS:
        if any(keyword in lowered for keyword in keywords):
            return category
    return ConditionCategory.OTHER


def _clean_condition_line(line: str) -> str:
    line = re.sub(r"^[-*\d.)\s]+", "", line.strip())
    line = re.sub(r"^if\s+", "", line, flags=re.IGNORECASE)
    return line.rstrip(".").strip()


def sample_conditions(
    goal: Goal,
    plan: Plan,
    completion: Callable[[str, SamplingParams], str],
    prompt_template: str | None = None,
    params: SamplingParams = SamplingParams(),
) -> list[Condition]:
    """Elicit conditions for (goal, plan); one condition per completion line.

    Output that yields no parseable condition produces an empty list and a
    warning record.
    """
    if len(plan) < 1:
        raise ValidationError("sample_conditions requires a non-empty plan")
    tpl = prompt_template if prompt_template is not None else load_template("conditions.txt")
    prompt = tpl.format(
        goal=goal.text,
        plan_lines="\n".join(f"Step {s.index}: {s.text}" for s in plan.steps),
    )
    text = completion(prompt, params)
    conditions: list[Condition] = []
    for line in text.splitlines():
        cleaned = _clean_condition_line(line)
        if cleaned:
            conditions.append(Condition(cleaned, categorize_condition(cleaned)))
    if not conditions:
        logger.warning("no conditions parsed for goal %r from completion output", goal.text)
    return conditions


def sample_counterfactual(
    goal: Goal,
    plan: Plan,
    condition: Condition,
    completion: Callable[[str, SamplingParams], str],
    prompt_template: str | None = None,
    params: SamplingParams = SamplingParams(),
) -> Plan:
    """Elicit a revision of ``plan`` that satisfies ``condition``."""
    if len(plan) < 1:
        raise ValidationError("sample_counterfactual requires a non-empty plan")
    tpl = prompt_template if prompt_template is not None else load_template("counterfactual.txt")
    prompt = tpl.format(
        goal=goal.text,
        condition=condition.text,
        plan_lines="\n".join(f"Step {s.index}: {s.text}" for s in plan.steps),
    )
    text = completion(prompt, params)
    revised = parse_plan(text, terminal=True)
    if len(revised) == 0:
        raise ParseError(f"no steps parsed from completion output: {text[:200]!r}")
    return revised
