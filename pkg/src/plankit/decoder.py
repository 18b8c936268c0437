"""Verifier-guided step-wise beam search.

The engine expands a size-K beam with N next-step candidates per iteration,
scores each hypothesis with a weighted sum of the mean per-token sequence
log-likelihood and the log of the current step's verifier validity, keeps
the top K, and stops once K hypotheses have completed. The highest-valued
completed hypothesis is returned.

Determinism: every source of randomness is derived from the decode seed,
the instance identity, the iteration, and the hypothesis lineage, so equal
inputs reproduce equal traces under any parallelism.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .core import Plan, PlanningInstance, Step, normalize_text
from .errors import PlankitError, ValidationError
from .scorers.base import DecodingMethod, ScorerBundle

VERIFIER_MODES = ("last", "sum")


def default_method_mix(beam_k: int = 5, top_p: float = 0.9) -> tuple[tuple[DecodingMethod, int], ...]:
    """Half beam, half nucleus candidates; ten in total by default."""
    return (
        (DecodingMethod.beam(beam_width=beam_k), 5),
        (DecodingMethod.nucleus(top_p=top_p, temperature=1.0), 5),
    )


@dataclass(frozen=True)
class DecodeParams:
    """Engine configuration.

    ``alpha`` weights likelihood against the verifier; ``epsilon`` clamps
    verifier validities away from zero before the log. ``method_mix`` lists
    (method, count) pairs whose counts sum to ``candidates_n``. With
    ``verifier_mode="sum"`` the value uses the sum of all step validities
    instead of only the current step's (off by default).
    """

    alpha: float = 0.75
    beam_k: int = 5
    candidates_n: int = 10
    method_mix: tuple[tuple[DecodingMethod, int], ...] = field(default_factory=default_method_mix)
    max_steps: int = 16
    epsilon: float = 1e-6
    seed: int = 0
    verifier_mode: str = "last"

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.beam_k < 1:
            raise ValidationError("beam_k must be >= 1")
        if self.candidates_n < 1:
            raise ValidationError("candidates_n must be >= 1")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be >= 1")
        if not (0.0 < self.epsilon <= 0.01):
            raise ValidationError(f"epsilon must be in (0, 0.01], got {self.epsilon}")
        if self.verifier_mode not in VERIFIER_MODES:
            raise ValidationError(f"verifier_mode must be one of {VERIFIER_MODES}")
        mix = tuple((method, int(count)) for method, count in self.method_mix)
        object.__setattr__(self, "method_mix", mix)
        total = sum(count for _, count in mix)
        if total != self.candidates_n:
            raise ValidationError(
                f"method_mix counts sum to {total}, expected candidates_n={self.candidates_n}"
            )
        if any(count < 1 for _, count in mix):
            raise ValidationError("method_mix counts must be >= 1")


@dataclass(frozen=True)
class Hypothesis:
    """A partial or complete plan under search."""

    steps: tuple[Step, ...]
    loglik_sum: float
    token_count: int
    verifier_log_scores: tuple[float, ...]
    complete: bool
    lineage: tuple[int, ...]
    value: float = math.nan

    @property
    def step_texts(self) -> tuple[str, ...]:
        return tuple(s.text for s in self.steps)


ROOT = Hypothesis((), 0.0, 0, (), False, ())


class DecodeError(PlankitError):
    """A scorer failed while expanding; carries the offending hypothesis and,
    once decode aborts, the partial trace gathered so far."""

    def __init__(self, message: str, hypothesis: Hypothesis):
        super().__init__(message)
        self.hypothesis = hypothesis
        self.trace: "DecodeTrace | None" = None


def value(hyp: Hypothesis, alpha: float, verifier_mode: str = "last") -> float:
    """Hypothesis value: alpha * mean per-token log-likelihood plus
    (1 - alpha) * the (clamped, logged) verifier term."""
    if not hyp.steps or hyp.token_count < 1:
        raise ValidationError("value requires a hypothesis with at least one step")
    normalized = hyp.loglik_sum / hyp.token_count
    if alpha == 1.0:
        return normalized
    if verifier_mode == "sum":
        verifier_term = math.fsum(hyp.verifier_log_scores)
    else:
        verifier_term = hyp.verifier_log_scores[-1]
    return alpha * normalized + (1.0 - alpha) * verifier_term


def _derive_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _instance_key(instance: PlanningInstance) -> str:
    return f"{instance.goal.id}:{instance.kind.value}"


@dataclass(frozen=True)
class PoolEntry:
    """Trace record for one pool hypothesis."""

    lineage: tuple[int, ...]
    last_text: str
    terminal_candidate: bool
    complete: bool
    value: float
    loglik_sum: float
    token_count: int
    verifier_log: float

    def to_dict(self) -> dict:
        return {
            "lineage": list(self.lineage),
            "last_text": self.last_text,
            "terminal_candidate": self.terminal_candidate,
            "complete": self.complete,
            "value": self.value,
            "loglik_sum": self.loglik_sum,
            "token_count": self.token_count,
            "verifier_log": self.verifier_log,
        }


@dataclass(frozen=True)
class IterationRecord:
    index: int
    pool: tuple[PoolEntry, ...]
    selected: tuple[tuple[int, ...], ...]
    finished: tuple[tuple[int, ...], ...]
    merged: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    pruned: tuple[tuple[int, ...], ...]
    capped: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "iteration": self.index,
            "pool": [entry.to_dict() for entry in self.pool],
            "selected": [list(l) for l in self.selected],
            "finished": [list(l) for l in self.finished],
            "merged": [[list(kept), list(dropped)] for kept, dropped in self.merged],
            "pruned": [list(l) for l in self.pruned],
            "capped": [list(l) for l in self.capped],
        }


@dataclass
class DecodeTrace:
    """Per-iteration record of pools, values, selections, and prune events."""

    instance_id: str
    iterations: list[IterationRecord] = field(default_factory=list)
    final_value: float | None = None
    complete: bool = False

    def to_records(self) -> list[dict]:
        return [{"id": self.instance_id, **it.to_dict()} for it in self.iterations]


def expand(
    beam: Sequence[Hypothesis],
    instance: PlanningInstance,
    bundle: ScorerBundle,
    params: DecodeParams,
    iteration: int,
) -> tuple[list[Hypothesis], list[tuple[tuple[int, ...], tuple[int, ...]]]]:
    """Expand every beam member with proposer candidates from each method.

    Returns the merged candidate pool plus (kept, dropped) lineage pairs for
    exact duplicates. Likelihoods accumulate from the candidates' log masses,
    which proposers guarantee to match the likelihood interface.
    """
    if not beam:
        raise ValidationError("expand requires a non-empty beam")
    if any(h.complete for h in beam):
        raise ValidationError("completed hypotheses must not be expanded")
    goal_norm = normalize_text(instance.goal.text)
    key = _instance_key(instance)
    pool: list[Hypothesis] = []
    seen: dict[tuple, int] = {}
    merged: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for parent in beam:
        ordinal = 0
        prefix_texts = parent.step_texts
        for method_index, (method, count) in enumerate(params.method_mix):
            seeded = replace(
                method,
                seed=_derive_seed(params.seed, key, iteration, parent.lineage, method_index),
            )
            try:
                candidates = bundle.proposer(instance, parent.steps, count, seeded)
            except PlankitError as exc:
                raise DecodeError(f"proposer failed: {exc}", parent) from exc
            for candidate in candidates:
                lineage = parent.lineage + (ordinal,)
                ordinal += 1
                dedup_key = (prefix_texts, candidate.text, candidate.terminal)
                if dedup_key in seen:
                    merged.append((pool[seen[dedup_key]].lineage, lineage))
                    continue
                if candidate.terminal:
                    if not parent.steps:
                        # End of plan before any step: nothing to rank or return.
                        continue
                    child = replace(parent, complete=True, lineage=lineage)
                else:
                    if params.alpha < 1.0:
                        try:
                            validity = bundle.verifier(
                                instance.goal.text, prefix_texts, candidate.text
                            )
                        except PlankitError as exc:
                            raise DecodeError(f"verifier failed: {exc}", parent) from exc
                        if not (0.0 <= validity <= 1.0):
                            raise DecodeError(
                                f"verifier returned {validity} outside [0, 1]", parent
                            )
                        verifier_log = math.log(min(max(validity, params.epsilon), 1.0))
                    else:
                        verifier_log = 0.0
                    step = Step(candidate.text, len(parent.steps) + 1)
                    child = Hypothesis(
                        steps=parent.steps + (step,),
                        loglik_sum=parent.loglik_sum + candidate.logprob_sum,
                        token_count=parent.token_count + candidate.token_count,
                        verifier_log_scores=parent.verifier_log_scores + (verifier_log,),
                        complete=normalize_text(candidate.text) == goal_norm,
                        lineage=lineage,
                    )
                child = replace(child, value=value(child, params.alpha, params.verifier_mode))
                seen[dedup_key] = len(pool)
                pool.append(child)
    return pool, merged


def _rank_key(hyp: Hypothesis):
    return (-hyp.value, len(hyp.lineage), hyp.lineage)


def select_top_k(
    pool: Sequence[Hypothesis], k: int, alpha: float, verifier_mode: str = "last"
) -> tuple[list[Hypothesis], list[Hypothesis], list[Hypothesis]]:
    """Keep the k best hypotheses by value; route completed ones to the
    finished pool. Ties break on shorter, then lexicographic lineage.

    Returns (beam, finished, pruned)."""
    ranked = sorted(
        (replace(h, value=value(h, alpha, verifier_mode)) for h in pool), key=_rank_key
    )
    top, pruned = ranked[:k], ranked[k:]
    beam = [h for h in top if not h.complete]
    finished = [h for h in top if h.complete]
    return beam, finished, pruned


def decode(
    instance: PlanningInstance, bundle: ScorerBundle, params: DecodeParams
) -> tuple[Plan, DecodeTrace]:
    """Run the guided search for one instance.

    Stops when the finished pool holds at least K completed plans, the beam
    is exhausted, or the step cap is reached. Returns the highest-valued
    finished plan, or the best incomplete hypothesis flagged non-terminal
    when nothing completed in time.
    """
    trace = DecodeTrace(instance_id=instance.goal.id)
    beam: list[Hypothesis] = [ROOT]
    finished: list[Hypothesis] = []
    capped: list[Hypothesis] = []
    for iteration in range(1, params.max_steps + 1):
        if not beam or len(finished) >= params.beam_k:
            break
        try:
            pool, merged = expand(beam, instance, bundle, params, iteration)
        except DecodeError as exc:
            exc.trace = trace
            raise
        if not pool:
            beam = []
            trace.iterations.append(
                IterationRecord(iteration, (), (), (), tuple(merged), (), ())
            )
            break
        new_beam, new_finished, pruned = select_top_k(
            pool, params.beam_k, params.alpha, params.verifier_mode
        )
        finished.extend(new_finished)
        still_open: list[Hypothesis] = []
        capped_now: list[Hypothesis] = []
        for hyp in new_beam:
            if len(hyp.steps) >= params.max_steps:
                capped_now.append(hyp)
            else:
                still_open.append(hyp)
        capped.extend(capped_now)
        beam = still_open
        trace.iterations.append(
            IterationRecord(
                index=iteration,
                pool=tuple(
                    PoolEntry(
                        lineage=h.lineage,
                        last_text=h.steps[-1].text if h.steps else "",
                        terminal_candidate=h.complete and len(h.steps) < len(h.lineage),
                        complete=h.complete,
                        value=h.value,
                        loglik_sum=h.loglik_sum,
                        token_count=h.token_count,
                        verifier_log=h.verifier_log_scores[-1] if h.verifier_log_scores else 0.0,
                    )
                    for h in pool
                ),
                selected=tuple(h.lineage for h in new_beam),
                finished=tuple(h.lineage for h in new_finished),
                merged=tuple(merged),
                pruned=tuple(h.lineage for h in pruned),
                capped=tuple(h.lineage for h in capped_now),
            )
        )
    if finished:
        best = min(finished, key=_rank_key)
        trace.final_value = best.value
        trace.complete = True
        return Plan(best.steps, terminal=True), trace
    fallback = capped + beam
    if fallback:
        best = min(fallback, key=_rank_key)
        trace.final_value = best.value
        return Plan(best.steps, terminal=False), trace
    return Plan((), terminal=False), trace


@dataclass
class BatchItem:
    """Outcome for one instance of a batch decode."""

    index: int
    plan: Plan | None = None
    trace: DecodeTrace | None = None
    error: str | None = None


def decode_batch(
    instances: Sequence[PlanningInstance],
    bundle: ScorerBundle,
    params: DecodeParams,
    parallelism: int = 1,
) -> list[BatchItem]:
    """Decode many instances; results are in input order and identical to a
    sequential run regardless of parallelism. Per-instance failures are
    reported on their item without aborting the batch."""
    if parallelism < 1:
        raise ValidationError("parallelism must be >= 1")

    def run(pair: tuple[int, PlanningInstance]) -> BatchItem:
        index, instance = pair
        try:
            plan, trace = decode(instance, bundle, params)
            return BatchItem(index=index, plan=plan, trace=trace)
        except PlankitError as exc:
            return BatchItem(index=index, error=f"{type(exc).__name__}: {exc}")

    work = list(enumerate(instances))
    if parallelism == 1:
        return [run(pair) for pair in work]
    with ThreadPoolExecutor(max_workers=parallelism) as executor:
        return list(executor.map(run, work))


def replay_iteration(record: IterationRecord, k: int) -> tuple[list, list]:
    """Recompute the selection for a traced iteration from its pool.

    Returns the (selected, finished) lineage lists implied by the recorded
    values; used to check that traces replay to the recorded beams.
    """
    ranked = sorted(record.pool, key=lambda e: (-e.value, len(e.lineage), e.lineage))
    top = ranked[:k]
    selected = [e.lineage for e in top if not e.complete]
    finished = [e.lineage for e in top if e.complete]
    return selected, finished
