"""Embodied evaluation: step-to-action translation, a miniature household
environment with preconditions and effects, and normalized longest common
subsequence scoring against gold action programs.

Environment fixture schema (version 1), a JSON document:

    {
      "schema_version": 1,
      "objects": {"tv": {"plugged_in": false, "switched_on": false}},
      "verbs": {
        "switch_on": {
          "arity": 1, "surface": "switch on",
          "preconditions": [{"arg": 0, "state": "plugged_in", "equals": true}],
          "effects": [{"arg": 0, "state": "switched_on", "set": true}]
        }
      }
    }

Preconditions and effects refer to boolean states of the argument objects.
A precondition on a state the object does not carry simply fails; unknown
objects are a validation error.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import FixtureError, ValidationError

ENV_SCHEMA_VERSION = 1

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class Embedder(Protocol):
    def similarity(self, a: str, b: str) -> float: ...


class TokenMultisetEmbedder:
    """Cosine similarity over token count vectors.

    Exact and order-invariant by construction, which keeps translation
    results checkable by hand.
    """

    def similarity(self, a: str, b: str) -> float:
        ca, cb = Counter(tokenize(a)), Counter(tokenize(b))
        if not ca or not cb:
            return 0.0
        dot = sum(ca[token] * cb[token] for token in ca.keys() & cb.keys())
        norm = math.sqrt(sum(v * v for v in ca.values())) * math.sqrt(
            sum(v * v for v in cb.values())
        )
        return dot / norm


class VectorEmbedder:
    """Cosine similarity over externally computed fixed-length vectors.

    ``lookup`` maps text to a vector; pass precomputed sentence embeddings
    here for fidelity runs against a real embedding model.
    """

    def __init__(self, lookup: Callable[[str], Sequence[float]]):
        self._lookup = lookup

    def similarity(self, a: str, b: str) -> float:
        va = np.asarray(self._lookup(a), dtype=float)
        vb = np.asarray(self._lookup(b), dtype=float)
        if va.shape != vb.shape:
            raise ValidationError("embedding vectors must share one fixed length")
        denom = float(np.linalg.norm(va) * np.linalg.norm(vb))
        if denom == 0.0:
            return 0.0
        return float(np.dot(va, vb) / denom)


@dataclass(frozen=True)
class GroundedAction:
    verb: str
    args: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {"verb": self.verb, "args": list(self.args)}

    @classmethod
    def from_record(cls, record: dict) -> "GroundedAction":
        return cls(record["verb"], tuple(record.get("args", ())))


@dataclass(frozen=True)
class StateRule:
    arg: int
    state: str
    value: bool


@dataclass(frozen=True)
class VerbSpec:
    name: str
    arity: int
    surface: str
    preconditions: tuple[StateRule, ...] = ()
    effects: tuple[StateRule, ...] = ()


class MiniEnv:
    """Deterministic simulator over boolean object states."""

    def __init__(self, objects: dict[str, dict[str, bool]], verbs: dict[str, VerbSpec]):
        self.initial = {name: dict(states) for name, states in objects.items()}
        self.verbs = dict(verbs)
        surfaces = [spec.surface for spec in self.verbs.values()]
        if len(set(surfaces)) != len(surfaces):
            raise FixtureError("verb surface forms must be unique")

    @classmethod
    def from_dict(cls, payload: dict) -> "MiniEnv":
        if payload.get("schema_version") != ENV_SCHEMA_VERSION:
            raise FixtureError(f"unsupported env schema_version {payload.get('schema_version')!r}")
        verbs = {}
        for name, raw in payload.get("verbs", {}).items():
            def rules(key: str) -> tuple[StateRule, ...]:
                out = []
                for rule in raw.get(key, []):
                    value = rule["equals"] if key == "preconditions" else rule["set"]
                    out.append(StateRule(int(rule["arg"]), rule["state"], bool(value)))
                return tuple(out)

            verbs[name] = VerbSpec(
                name=name,
                arity=int(raw["arity"]),
                surface=raw.get("surface", name.replace("_", " ")),
                preconditions=rules("preconditions"),
                effects=rules("effects"),
            )
        return cls(payload.get("objects", {}), verbs)

    @classmethod
    def load(cls, path: str | Path) -> "MiniEnv":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def fresh_state(self) -> dict[str, dict[str, bool]]:
        return {name: dict(states) for name, states in self.initial.items()}

    def validate_action(self, action: GroundedAction) -> VerbSpec:
        spec = self.verbs.get(action.verb)
        if spec is None:
            raise ValidationError(f"unknown verb {action.verb!r}")
        if len(action.args) != spec.arity:
            raise ValidationError(
                f"{action.verb} takes {spec.arity} argument(s), got {len(action.args)}"
            )
        for obj in action.args:
            if obj not in self.initial:
                raise ValidationError(f"unknown object {obj!r}")
        return spec


@dataclass(frozen=True)
class ActionEntry:
    action: GroundedAction
    surface: str


class ActionVocab:
    """Grounded action inventory with unique rendered surface forms."""

    def __init__(self, entries: Sequence[ActionEntry]):
        self.entries = list(entries)
        seen = set()
        for entry in self.entries:
            if entry.surface in seen:
                raise FixtureError(f"duplicate action surface {entry.surface!r}")
            seen.add(entry.surface)

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_env(cls, env: MiniEnv) -> "ActionVocab":
        """Enumerate every grounding of every verb over the env objects."""
        objects = list(env.initial.keys())
        entries: list[ActionEntry] = []
        for spec in env.verbs.values():
            if spec.arity == 0:
                groundings: list[tuple[str, ...]] = [()]
            elif spec.arity == 1:
                groundings = [(obj,) for obj in objects]
            elif spec.arity == 2:
                groundings = [(a, b) for a in objects for b in objects if a != b]
            else:
                raise FixtureError(f"unsupported arity {spec.arity} for verb {spec.name}")
            for args in groundings:
                surface = " ".join((spec.surface, *args)).strip()
                entries.append(ActionEntry(GroundedAction(spec.name, args), surface))
        return cls(entries)

    def surface_of(self, action: GroundedAction) -> str:
        for entry in self.entries:
            if entry.action == action:
                return entry.surface
        raise ValidationError(f"action {action} is not in the vocabulary")


def translate_step(
    step_text: str,
    vocab: ActionVocab,
    embedder: Embedder | None = None,
    min_similarity: float = 0.0,
) -> GroundedAction | None:
    """Nearest action by surface similarity; ties keep the earliest entry.

    Returns None when the best similarity falls below ``min_similarity``.
    """
    if len(vocab) == 0:
        raise ValidationError("translate_step requires a non-empty vocabulary")
    embedder = embedder or TokenMultisetEmbedder()
    best: ActionEntry | None = None
    best_similarity = -math.inf
    for entry in vocab.entries:
        similarity = embedder.similarity(step_text, entry.surface)
        if similarity > best_similarity:
            best, best_similarity = entry, similarity
    if best is None or best_similarity < min_similarity:
        return None
    return best.action


def executable(
    program: Sequence[GroundedAction], env: MiniEnv
) -> tuple[bool, int | None]:
    """Simulate a program; returns (fully executable, 1-based first failure).

    An action executes when all its preconditions hold; effects then apply.
    The empty program is vacuously executable.
    """
    state = env.fresh_state()
    for position, action in enumerate(program, start=1):
        spec = env.validate_action(action)
        ok = all(
            state[action.args[rule.arg]].get(rule.state, False) == rule.value
            for rule in spec.preconditions
        )
        if not ok:
            return False, position
        for rule in spec.effects:
            state[action.args[rule.arg]][rule.state] = rule.value
    return True, None


def executability(programs: Sequence[Sequence[GroundedAction]], env: MiniEnv) -> float:
    """Fraction of programs that execute fully, in [0, 1]."""
    if not programs:
        raise ValidationError("executability requires at least one program")
    return sum(1 for program in programs if executable(program, env)[0]) / len(programs)


def lcs_score(predicted: Sequence[GroundedAction], gold: Sequence[GroundedAction]) -> float:
    """Longest common subsequence length over exact action equality,
    normalized by the longer program. Two empty programs score 1."""
    n, m = len(predicted), len(gold)
    if n == 0 and m == 0:
        return 1.0
    if n == 0 or m == 0:
        return 0.0
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if predicted[i - 1] == gold[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[n][m] / max(n, m)


@dataclass(frozen=True)
class EvalConfig:
    min_similarity: float = 0.0


@dataclass
class EvalReport:
    records: list[dict] = field(default_factory=list)
    executability: float = 0.0
    mean_lcs: float = 0.0

    def to_records(self) -> list[dict]:
        return list(self.records)

    def aggregate(self) -> dict:
        return {
            "goals": len(self.records),
            "executability": self.executability,
            "mean_lcs": self.mean_lcs,
        }


def load_golds(path: str | Path) -> list[dict]:
    """Gold program records: {goal_id, goal?, program: [{verb, args}]}."""
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            record["program"] = [GroundedAction.from_record(a) for a in record["program"]]
            out.append(record)
    return out


def evaluate(
    plans: Sequence[tuple[str, Sequence[str]]],
    env: MiniEnv,
    vocab: ActionVocab,
    golds: Sequence[dict],
    embedder: Embedder | None = None,
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Translate, simulate, and score each plan against its aligned gold.

    ``plans`` holds (goal_id, step texts) pairs aligned one-to-one with the
    gold records; misalignment is a validation error.
    """
    if len(plans) != len(golds):
        raise ValidationError(f"{len(plans)} plans vs {len(golds)} golds: inputs must align")
    embedder = embedder or TokenMultisetEmbedder()
    report = EvalReport()
    executable_count = 0
    lcs_total = 0.0
    for (goal_id, steps), gold in zip(plans, golds):
        if gold.get("goal_id") != goal_id:
            raise ValidationError(
                f"plan {goal_id!r} is not aligned with gold {gold.get('goal_id')!r}"
            )
        program: list[GroundedAction] = []
        untranslated = 0
        for text in steps:
            action = translate_step(text, vocab, embedder, config.min_similarity)
            if action is None:
                untranslated += 1
            else:
                program.append(action)
        ok, first_failure = executable(program, env)
        score = lcs_score(program, gold["program"])
        executable_count += 1 if ok else 0
        lcs_total += score
        report.records.append(
            {
                "goal_id": goal_id,
                "executable": ok,
                "first_failure": first_failure,
                "lcs": score,
                "untranslated_steps": untranslated,
                "program": [action.to_record() for action in program],
            }
        )
    count = len(plans)
    report.executability = executable_count / count if count else 0.0
    report.mean_lcs = lcs_total / count if count else 0.0
    return report
