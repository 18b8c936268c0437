"""Critic-threshold curation of generated tuples.

A record is accepted exactly when its critic score is greater than or equal
to the threshold for its tuple kind (the boundary counts as accept). The
default thresholds are 0.65 for plans, 0.76 for conditions, and 0.82 for
counterfactual plans. Precision/recall curves over labeled records support
picking different operating points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError

TUPLE_KINDS = ("plan", "condition", "counterfactual")

ACCEPTED = "accepted"
REJECTED = "rejected"
PENDING = "pending"


@dataclass(frozen=True)
class ThresholdPolicy:
    plan: float = 0.65
    condition: float = 0.76
    counterfactual: float = 0.82

    def __post_init__(self):
        for kind in TUPLE_KINDS:
            tau = getattr(self, kind)
            if not (0.0 <= tau <= 1.0):
                raise ValidationError(f"threshold for {kind} must be in [0, 1], got {tau}")

    def for_kind(self, kind: str) -> float:
        if kind not in TUPLE_KINDS:
            raise ValidationError(f"unknown tuple kind {kind!r}")
        return getattr(self, kind)


@dataclass(frozen=True)
class CurationRecord:
    """A generated tuple with its critic score and curation state.

    ``label`` is an optional gold human label ("valid"/"invalid") used for
    precision/recall reporting, not by thresholding itself.
    """

    tuple_kind: str
    payload: dict
    critic_score: float | None = None
    decision: str = PENDING
    label: str | None = None
    note: str | None = None

    def __post_init__(self):
        if self.tuple_kind not in TUPLE_KINDS:
            raise ValidationError(f"unknown tuple kind {self.tuple_kind!r}")
        if self.critic_score is not None and not (0.0 <= self.critic_score <= 1.0):
            raise ValidationError(f"critic_score must be in [0, 1], got {self.critic_score}")
        if self.decision not in (ACCEPTED, REJECTED, PENDING):
            raise ValidationError(f"unknown decision {self.decision!r}")
        if self.label is not None and self.label not in ("valid", "invalid"):
            raise ValidationError(f"label must be 'valid' or 'invalid', got {self.label!r}")

    def to_record(self) -> dict:
        record = {
            "tuple_kind": self.tuple_kind,
            "payload": self.payload,
            "critic_score": self.critic_score,
            "decision": self.decision,
        }
        if self.label is not None:
            record["label"] = self.label
        if self.note is not None:
            record["note"] = self.note
        return record

    @classmethod
    def from_record(cls, record: dict) -> "CurationRecord":
        return cls(
            tuple_kind=record["tuple_kind"],
            payload=record.get("payload", {}),
            critic_score=record.get("critic_score"),
            decision=record.get("decision", PENDING),
            label=record.get("label"),
            note=record.get("note"),
        )


@dataclass
class CurationResult:
    accepted: list[CurationRecord]
    rejected: list[CurationRecord]
    pending: list[CurationRecord]

    def all_records(self) -> list[CurationRecord]:
        return self.accepted + self.rejected + self.pending


def curate(
    records: Sequence[CurationRecord], policy: ThresholdPolicy = ThresholdPolicy()
) -> CurationResult:
    """Partition records by the per-kind thresholds.

    Records without a critic score are marked pending with a diagnostic
    note. Input order is preserved inside each partition.
    """
    accepted: list[CurationRecord] = []
    rejected: list[CurationRecord] = []
    pending: list[CurationRecord] = []
    for record in records:
        if record.critic_score is None:
            pending.append(replace(record, decision=PENDING, note="missing critic_score"))
            continue
        tau = policy.for_kind(record.tuple_kind)
        if record.critic_score >= tau:
            accepted.append(replace(record, decision=ACCEPTED))
        else:
            rejected.append(replace(record, decision=REJECTED))
    return CurationResult(accepted, rejected, pending)


@dataclass(frozen=True)
class PrPoint:
    tau: float
    precision: float  # NaN when nothing is accepted at this threshold
    recall: float
    accepted_count: int


def pr_curve(
    records: Sequence[CurationRecord], thresholds: Sequence[float] | None = None
) -> list[PrPoint]:
    """Precision and recall of the ``score >= tau`` rule at each threshold.

    With ``thresholds=None`` the curve is evaluated at every distinct score,
    which covers every operating point the rule can reach. Precision at an
    empty accepted set is reported as NaN rather than a made-up value.
    """
    if not records:
        raise ValidationError("pr_curve requires at least one record")
    for i, record in enumerate(records):
        if record.critic_score is None:
            raise ValidationError(f"record {i} has no critic_score")
        if record.label is None:
            raise ValidationError(f"record {i} has no gold label")
    scores = [r.critic_score for r in records]
    gold = [r.label == "valid" for r in records]
    positives = sum(gold)
    if thresholds is None:
        thresholds = sorted(set(scores))
    points = []
    for tau in thresholds:
        accepted = [g for s, g in zip(scores, gold) if s >= tau]
        tp = sum(accepted)
        precision = tp / len(accepted) if accepted else math.nan
        recall = tp / positives if positives else math.nan
        points.append(PrPoint(tau, precision, recall, len(accepted)))
    return points


def write_pr_report(path: str | Path, points: Sequence[PrPoint]) -> Path:
    """Tab-separated report with columns (tau, precision, recall, accepted)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("tau\tprecision\trecall\taccepted\n")
        for p in points:
            precision = "NA" if math.isnan(p.precision) else f"{p.precision:.6f}"
            recall = "NA" if math.isnan(p.recall) else f"{p.recall:.6f}"
            handle.write(f"{p.tau:.6f}\t{precision}\t{recall}\t{p.accepted_count}\n")
    return path


def read_curation_records(path: str | Path) -> list[CurationRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(CurationRecord.from_record(json.loads(line)))
    return records


def write_curation_records(path: str | Path, records: Iterable[CurationRecord]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_record(), ensure_ascii=False))
            handle.write("\n")
    return path


DIMENSIONS = ("achievability", "topicality", "ordering", "completeness")


def binarize_likert(value: int) -> int:
    """Five-point scale to binary: the top three labels count as valid."""
    if not (1 <= value <= 5):
        raise ValidationError(f"likert value must be in 1..5, got {value}")
    return 1 if value >= 3 else 0


@dataclass(frozen=True)
class AnnotationBundle:
    """Binary ratings from three annotators for each quality dimension."""

    achievability: tuple[int, int, int]
    topicality: tuple[int, int, int]
    ordering: tuple[int, int, int]
    completeness: tuple[int, int, int]

    def __post_init__(self):
        for dimension in DIMENSIONS:
            ratings = tuple(getattr(self, dimension))
            object.__setattr__(self, dimension, ratings)
            if len(ratings) != 3 or any(r not in (0, 1) for r in ratings):
                raise ValidationError(
                    f"{dimension} needs exactly three ratings in {{0, 1}}, got {ratings}"
                )

    @classmethod
    def from_likert(cls, **likert: tuple[int, int, int]) -> "AnnotationBundle":
        return cls(**{
            dim: tuple(binarize_likert(v) for v in likert[dim]) for dim in DIMENSIONS
        })


def aggregate_plan_validity(bundle: AnnotationBundle) -> str:
    """Aggregate three annotators into a single valid/invalid plan label.

    A plan is valid when the mean rating exceeds 0.25 on achievability,
    topicality, and ordering, and reaches at least 0.65 on completeness.
    """
    means = {dim: sum(getattr(bundle, dim)) / 3.0 for dim in DIMENSIONS}
    valid = (
        means["achievability"] > 0.25
        and means["topicality"] > 0.25
        and means["ordering"] > 0.25
        and means["completeness"] >= 0.65
    )
    return "valid" if valid else "invalid"
