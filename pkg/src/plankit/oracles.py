"""Independent reference routines used to cross-check the engine.

Everything here is deliberately written against the raw fixture data rather
than the engine's own code paths, so these functions can serve as oracles
in tests and in the benchmark suites.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

from .core import normalize_text
from .scorers.mockworld import MockWorld


def plan_value(
    log_probs: Sequence[float],
    validities: Sequence[float],
    alpha: float,
    epsilon: float,
    verifier_mode: str = "last",
) -> float:
    """Value of a complete plan computed directly from fixture numbers."""
    mean_loglik = math.fsum(log_probs) / len(log_probs)
    if alpha == 1.0:
        return mean_loglik
    clamped = [math.log(min(max(v, epsilon), 1.0)) for v in validities]
    verifier_term = math.fsum(clamped) if verifier_mode == "sum" else clamped[-1]
    return alpha * mean_loglik + (1.0 - alpha) * verifier_term


def enumerate_complete_plans(
    world: MockWorld,
    alpha: float,
    epsilon: float = 1e-6,
    verifier_mode: str = "last",
) -> list[tuple[tuple[str, ...], float]]:
    """All complete plans of a world with their values, in depth-first order.

    A path is complete where end-of-plan mass is available, or where a step
    restates the goal (in which case the walk does not descend further,
    mirroring the engine's completion rule).
    """
    goal_norm = normalize_text(world.goal)
    results: list[tuple[tuple[str, ...], float]] = []

    def walk(prefix: tuple[str, ...], log_probs: list[float], validities: list[float]) -> None:
        if prefix:
            restated = normalize_text(prefix[-1]) == goal_norm
            if restated or world.residual_mass(prefix) > 0.0:
                results.append(
                    (prefix, plan_value(log_probs, validities, alpha, epsilon, verifier_mode))
                )
            if restated:
                return
        for node in world.children(prefix):
            walk(
                prefix + (node.step,),
                log_probs + [math.log(node.prob)],
                validities + [node.validity],
            )

    walk((), [], [])
    return results


def argmax_plan(
    enumerated: Sequence[tuple[tuple[str, ...], float]]
) -> tuple[tuple[str, ...], float]:
    """Highest-valued plan; ties keep the earliest in enumeration order."""
    if not enumerated:
        raise ValueError("no complete plans to rank")
    best = enumerated[0]
    for item in enumerated[1:]:
        if item[1] > best[1]:
            best = item
    return best


def likelihood_beam_search(
    world: MockWorld, k: int, n: int, max_steps: int = 32
) -> tuple[tuple[str, ...], float, bool]:
    """Plain step-wise beam search by mean per-step log-likelihood.

    Independent of the engine: candidates are read straight from the world,
    sorted by probability, and ranked by normalized log-likelihood only.
    Returns (steps, value, completed).
    """
    goal_norm = normalize_text(world.goal)
    beam: list[tuple[tuple[str, ...], float]] = [((), 0.0)]
    finished: list[tuple[tuple[str, ...], float]] = []
    for _ in range(max_steps):
        if not beam or len(finished) >= k:
            break
        pool: list[tuple[tuple[str, ...], float, bool]] = []
        for prefix, loglik in beam:
            entries = [(node.step, node.prob, False) for node in world.children(prefix)]
            residual = world.residual_mass(prefix)
            if residual > 0.0:
                entries.append(("", residual, True))
            entries.sort(key=lambda e: -e[1])
            for text, prob, terminal in entries[:n]:
                if terminal:
                    if prefix:
                        pool.append((prefix, loglik, True))
                else:
                    done = normalize_text(text) == goal_norm
                    pool.append((prefix + (text,), loglik + math.log(prob), done))
        scored = sorted(
            ((steps, loglik, loglik / len(steps), done) for steps, loglik, done in pool if steps),
            key=lambda item: -item[2],
        )
        beam = []
        for steps, loglik, norm, done in scored[:k]:
            if done:
                finished.append((steps, norm))
            else:
                beam.append((steps, loglik))
    if finished:
        best = max(finished, key=lambda item: item[1])
        return best[0], best[1], True
    if beam:
        steps, loglik = max(beam, key=lambda item: item[1] / len(item[0]))
        return steps, loglik / len(steps), False
    return (), math.nan, False


def lcs_length_recursive(a: Sequence, b: Sequence) -> int:
    """Classic recursive longest-common-subsequence length with memoization.

    Kept as an independent formulation so it can cross-check the iterative
    implementation used for scoring.
    """
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return 0
        if a[i - 1] == b[j - 1]:
            return rec(i - 1, j - 1) + 1
        return max(rec(i - 1, j), rec(i, j - 1))

    result = rec(len(a), len(b))
    rec.cache_clear()
    return result


def plan_validity_by_counts(
    achievability: Sequence[int],
    topicality: Sequence[int],
    ordering: Sequence[int],
    completeness: Sequence[int],
) -> str:
    """Annotator aggregation expressed by vote counts rather than means.

    With three binary ratings, a mean above 0.25 is one or more positive
    votes and a mean of at least 0.65 is two or more.
    """
    gated = (
        sum(achievability) >= 1
        and sum(topicality) >= 1
        and sum(ordering) >= 1
        and sum(completeness) >= 2
    )
    return "valid" if gated else "invalid"
