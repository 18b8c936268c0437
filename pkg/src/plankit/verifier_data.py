"""Construction of (plan-prefix, next-step) verifier training pairs.

Positives are the true continuations of gold plans. Pseudo-negatives come
from five perturbation families applied to the same plans: repeating the
immediately previous step, repeating a distant step, skipping ahead past a
missing step, and swapping adjacent or distant steps inside the prefix.
A post-filter drops any perturbed pair that collides with a true pair of
the same plan, which can happen when step texts repeat.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .core import Goal, Plan, Step
from .errors import ValidationError


class PerturbationKind(str, Enum):
    REORDER_NEAR = "reorder-near"
    REORDER_DISTANT = "reorder-distant"
    REPEAT_NEAR = "repeat-near"
    REPEAT_DISTANT = "repeat-distant"
    MISSING = "missing"


ALL_KINDS: tuple[PerturbationKind, ...] = (
    PerturbationKind.REORDER_NEAR,
    PerturbationKind.REORDER_DISTANT,
    PerturbationKind.REPEAT_NEAR,
    PerturbationKind.REPEAT_DISTANT,
    PerturbationKind.MISSING,
)

VALID = "valid"
INVALID = "invalid"


@dataclass(frozen=True)
class VerifierExample:
    """One (goal, prefix, candidate) training pair."""

    goal: Goal
    prefix: tuple[Step, ...]
    candidate: Step
    label: str
    kind: PerturbationKind | None
    source_plan_id: str

    @property
    def prefix_texts(self) -> tuple[str, ...]:
        return tuple(s.text for s in self.prefix)

    def to_record(self) -> dict:
        record = {
            "goal": self.goal.text,
            "prefix": list(self.prefix_texts),
            "candidate": self.candidate.text,
            "label": self.label,
        }
        if self.kind is not None:
            record["kind"] = self.kind.value
        record["source_plan_id"] = self.source_plan_id
        return record


def _reindexed(texts: Sequence[str]) -> tuple[Step, ...]:
    return tuple(Step(text, i) for i, text in enumerate(texts, start=1))


def positives(plan: Plan, goal: Goal, source_plan_id: str | None = None) -> list[VerifierExample]:
    """True (prefix, next-step) pairs: one per plan position."""
    if len(plan) < 1:
        raise ValidationError("positives require a plan with at least one step")
    plan_id = source_plan_id or goal.id
    texts = plan.step_texts
    out = []
    for t in range(1, len(texts) + 1):
        out.append(
            VerifierExample(
                goal=goal,
                prefix=_reindexed(texts[: t - 1]),
                candidate=Step(texts[t - 1], t),
                label=VALID,
                kind=None,
                source_plan_id=plan_id,
            )
        )
    return out


def _eligible_positions(kind: PerturbationKind, length: int) -> list[tuple]:
    """Perturbation slots in canonical ascending order; positions are 1-based."""
    t_range = range(1, length + 1)
    if kind is PerturbationKind.REPEAT_NEAR:
        return [(t,) for t in t_range if t >= 2]
    if kind is PerturbationKind.REPEAT_DISTANT:
        return [(t, j) for t in t_range if t >= 3 for j in range(1, t - 1)]
    if kind is PerturbationKind.MISSING:
        return [
            (t, tp) for t in t_range for tp in range(t + 2, length + 1)
        ]
    if kind is PerturbationKind.REORDER_NEAR:
        return [(t,) for t in t_range if 2 <= t <= length - 1]
    if kind is PerturbationKind.REORDER_DISTANT:
        return [
            (i, j, t)
            for t in t_range
            for i in range(1, t)
            for j in range(i + 2, t)
        ]
    raise ValidationError(f"unknown perturbation kind {kind}")


def _build_negative(
    kind: PerturbationKind, position: tuple, texts: tuple[str, ...]
) -> tuple[tuple[str, ...], str]:
    """Return (prefix texts, candidate text) for one perturbation slot."""
    if kind is PerturbationKind.REPEAT_NEAR:
        (t,) = position
        return texts[: t - 1], texts[t - 2]
    if kind is PerturbationKind.REPEAT_DISTANT:
        t, j = position
        return texts[: t - 1], texts[j - 1]
    if kind is PerturbationKind.MISSING:
        t, tp = position
        return texts[: t - 1], texts[tp - 1]
    if kind is PerturbationKind.REORDER_NEAR:
        (t,) = position
        prefix = list(texts[:t])
        prefix[t - 2], prefix[t - 1] = prefix[t - 1], prefix[t - 2]
        return tuple(prefix), texts[t]
    if kind is PerturbationKind.REORDER_DISTANT:
        i, j, t = position
        prefix = list(texts[: t - 1])
        prefix[i - 1], prefix[j - 1] = prefix[j - 1], prefix[i - 1]
        return tuple(prefix), texts[t - 1]
    raise ValidationError(f"unknown perturbation kind {kind}")


def _kind_seed(seed: int, plan_id: str, kind: PerturbationKind) -> int:
    digest = hashlib.sha256(f"{seed}|{plan_id}|{kind.value}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def negatives(
    plan: Plan,
    goal: Goal,
    kinds: Sequence[PerturbationKind] = ALL_KINDS,
    per_kind: int = 2,
    seed: int = 0,
    source_plan_id: str | None = None,
) -> list[VerifierExample]:
    """Up to ``per_kind`` seeded pseudo-negative pairs per perturbation kind.

    Sampling is uniform without replacement over the eligible positions of
    each kind; kinds with no eligible positions contribute nothing. Pairs
    textually equal to a true pair of the same plan are filtered out.
    """
    if per_kind <= 0:
        raise ValidationError(f"per_kind must be positive, got {per_kind}")
    plan_id = source_plan_id or goal.id
    texts = plan.step_texts
    valid_pairs = {(texts[: t - 1], texts[t - 1]) for t in range(1, len(texts) + 1)}
    out: list[VerifierExample] = []
    for kind in kinds:
        kind = PerturbationKind(kind)
        eligible = _eligible_positions(kind, len(texts))
        if not eligible:
            continue
        rng = random.Random(_kind_seed(seed, plan_id, kind))
        chosen = sorted(rng.sample(eligible, min(per_kind, len(eligible))))
        for position in chosen:
            prefix_texts, candidate_text = _build_negative(kind, position, texts)
            if (prefix_texts, candidate_text) in valid_pairs:
                continue
            out.append(
                VerifierExample(
                    goal=goal,
                    prefix=_reindexed(prefix_texts),
                    candidate=Step(candidate_text, len(prefix_texts) + 1),
                    label=INVALID,
                    kind=kind,
                    source_plan_id=plan_id,
                )
            )
    return out


@dataclass(frozen=True)
class DatasetConfig:
    """Defaults sized so a few thousand plans of average length six land
    near the target pair count."""

    kinds: tuple[PerturbationKind, ...] = ALL_KINDS
    per_kind: int = 2
    seed: int = 0
    target_total: int = 47_000
    tolerance: float = 0.10


def build_dataset(
    items: Sequence[tuple[Goal, Plan]], config: DatasetConfig = DatasetConfig()
) -> tuple[list[VerifierExample], dict]:
    """Concatenate positives and negatives for every plan, plus a manifest.

    The manifest reports counts per label and kind, the positives to
    negatives ratio, the seed, and whether the total is within tolerance of
    the configured target scale.
    """
    if not items:
        raise ValidationError("build_dataset requires at least one plan")
    examples: list[VerifierExample] = []
    kind_counts = {kind.value: 0 for kind in config.kinds}
    n_pos = 0
    n_neg = 0
    for goal, plan in items:
        pos = positives(plan, goal)
        neg = negatives(plan, goal, config.kinds, config.per_kind, config.seed)
        n_pos += len(pos)
        n_neg += len(neg)
        for example in neg:
            kind_counts[example.kind.value] += 1
        examples.extend(pos)
        examples.extend(neg)
    total = n_pos + n_neg
    ratio = "no-negatives" if n_neg == 0 else round(n_pos / n_neg, 6)
    low = config.target_total * (1.0 - config.tolerance)
    high = config.target_total * (1.0 + config.tolerance)
    manifest = {
        "plans": len(items),
        "total": total,
        "positives": n_pos,
        "negatives": n_neg,
        "per_kind": kind_counts,
        "ratio_pos_to_neg": ratio,
        "seed": config.seed,
        "per_kind_quota": config.per_kind,
        "target_total": config.target_total,
        "within_tolerance": low <= total <= high,
    }
    return examples, manifest


def write_dataset(
    path: str | Path, examples: Iterable[VerifierExample], manifest: dict | None = None
) -> Path:
    """Write examples as JSON lines; the manifest lands in a sibling file."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example.to_record(), ensure_ascii=False))
            handle.write("\n")
    if manifest is not None:
        manifest_path = path.with_suffix(".manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")
    return path
