"""A finite, deterministic tree of plan steps used as a test scorer.

Fixture schema (version 1), a JSON document:

    {
      "schema_version": 1,
      "goal": "make morning coffee",
      "nodes": [
        {"prefix": [], "step": "fill the water tank", "prob": 0.4, "validity": 0.9},
        {"prefix": ["fill the water tank"], "step": "brew", "prob": 1.0, "validity": 0.8}
      ]
    }

Each node is addressed by the texts along its path. ``prob`` is the
conditional probability of the step given its parent; children of a node may
sum to at most 1 and any remainder is end-of-plan mass. ``validity`` is the
verifier score for (prefix, step). Sibling step texts must be unique so that
paths address nodes unambiguously.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from itertools import count
from pathlib import Path
from typing import Sequence

from ..core import PlanningInstance, Step
from ..errors import FixtureError, ValidationError
from .base import DecodingMethod, ScorerBundle, StepCandidate

SCHEMA_VERSION = 1

# Residual end-of-plan mass below this threshold is treated as zero.
RESIDUAL_EPS = 1e-9

# Verifier score returned for (prefix, step) pairs the world does not know.
UNKNOWN_VALIDITY = 0.5


@dataclass(frozen=True)
class WorldNode:
    step: str
    prob: float
    validity: float


class MockWorld:
    """Read-only step tree; safe to share between threads after construction."""

    def __init__(self, nodes: Sequence[dict], goal: str = "mock goal"):
        self.goal = goal
        self._children: dict[tuple[str, ...], list[WorldNode]] = {}
        known_paths: set[tuple[str, ...]] = {()}
        for i, raw in enumerate(nodes):
            try:
                prefix = tuple(raw["prefix"])
                step = raw["step"]
                prob = float(raw["prob"])
                validity = float(raw["validity"])
            except (KeyError, TypeError) as exc:
                raise FixtureError(f"node {i} is malformed: {exc}") from exc
            if not (0.0 < prob <= 1.0):
                raise FixtureError(f"node {i}: prob must be in (0, 1], got {prob}")
            if not (0.0 <= validity <= 1.0):
                raise FixtureError(f"node {i}: validity must be in [0, 1], got {validity}")
            if prefix not in known_paths:
                raise FixtureError(f"node {i}: prefix {list(prefix)} does not name an existing node")
            siblings = self._children.setdefault(prefix, [])
            if any(sib.step == step for sib in siblings):
                raise FixtureError(f"node {i}: duplicate sibling step {step!r} under {list(prefix)}")
            siblings.append(WorldNode(step, prob, validity))
            known_paths.add(prefix + (step,))
        for prefix, siblings in self._children.items():
            total = math.fsum(node.prob for node in siblings)
            if total > 1.0 + 1e-9:
                raise FixtureError(
                    f"children of {list(prefix)} have probability mass {total:.6f} > 1"
                )

    @classmethod
    def from_dict(cls, payload: dict) -> "MockWorld":
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise FixtureError(f"unsupported world schema_version {version!r}")
        return cls(payload.get("nodes", []), payload.get("goal", "mock goal"))

    @classmethod
    def load(cls, path: str | Path) -> "MockWorld":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def to_dict(self) -> dict:
        nodes = []
        stack: list[tuple[str, ...]] = [()]
        while stack:
            prefix = stack.pop(0)
            for node in self._children.get(prefix, []):
                nodes.append(
                    {
                        "prefix": list(prefix),
                        "step": node.step,
                        "prob": node.prob,
                        "validity": node.validity,
                    }
                )
                stack.append(prefix + (node.step,))
        return {"schema_version": SCHEMA_VERSION, "goal": self.goal, "nodes": nodes}

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, ensure_ascii=False, indent=1)
            handle.write("\n")

    def children(self, prefix: Sequence[str]) -> list[WorldNode]:
        return list(self._children.get(tuple(prefix), []))

    def has_path(self, path: Sequence[str]) -> bool:
        prefix: tuple[str, ...] = ()
        for text in path:
            if not any(node.step == text for node in self._children.get(prefix, [])):
                return False
            prefix = prefix + (text,)
        return True

    def residual_mass(self, prefix: Sequence[str]) -> float:
        total = math.fsum(node.prob for node in self._children.get(tuple(prefix), []))
        residual = 1.0 - total
        return residual if residual > RESIDUAL_EPS else 0.0

    def validity(self, prefix: Sequence[str], candidate: str) -> float:
        for node in self._children.get(tuple(prefix), []):
            if node.step == candidate:
                return node.validity
        return UNKNOWN_VALIDITY

    def stats(self) -> dict:
        """Leaf count, maximum branching, depth, and count of endable paths."""
        n_leaves = 0
        max_branching = 0
        depth = 0
        endable = 0
        stack: list[tuple[tuple[str, ...], int]] = [((), 0)]
        while stack:
            prefix, d = stack.pop()
            kids = self._children.get(prefix, [])
            max_branching = max(max_branching, len(kids))
            depth = max(depth, d)
            if not kids:
                n_leaves += 1
                endable += 1
            elif self.residual_mass(prefix) > 0.0 and prefix:
                endable += 1
            for node in kids:
                stack.append((prefix + (node.step,), d + 1))
        return {
            "leaves": n_leaves,
            "max_branching": max_branching,
            "depth": depth,
            "endable_paths": endable,
        }


def _entries(world: MockWorld, prefix: Sequence[str]) -> list[tuple[str, float, bool]]:
    """Children plus the end-of-plan entry, in child order with the terminal last."""
    out = [(node.step, node.prob, False) for node in world.children(prefix)]
    residual = world.residual_mass(prefix)
    if residual > 0.0:
        out.append(("", residual, True))
    return out


def mock_propose(
    world: MockWorld, prefix: Sequence[str | Step], n: int, method: DecodingMethod
) -> list[StepCandidate]:
    """Propose up to ``n`` next-step candidates below ``prefix``.

    Greedy and beam return entries sorted by probability descending (ties by
    child order, end-of-plan last). Nucleus keeps the smallest top-p mass of
    the (temperature-scaled) distribution and samples without replacement
    using the method seed. Candidate log-probabilities are always the raw
    conditional log masses so they stay consistent with the likelihood.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    texts = tuple(s.text if isinstance(s, Step) else s for s in prefix)
    # Off-tree prefixes and exhausted nodes only offer end of plan (residual 1).
    entries = _entries(world, texts)

    def to_candidate(entry: tuple[str, float, bool]) -> StepCandidate:
        text, prob, terminal = entry
        return StepCandidate(text, math.log(prob), 1, terminal)

    if method.kind in ("greedy", "beam"):
        order = sorted(range(len(entries)), key=lambda i: (-entries[i][1], i))
        return [to_candidate(entries[i]) for i in order[:n]]

    # Nucleus: temperature-scale, renormalize, take the smallest prefix of the
    # sorted distribution whose cumulative mass reaches top_p, then sample.
    temperature = method.temperature if method.temperature is not None else 1.0
    weights = [prob ** (1.0 / temperature) for _, prob, _ in entries]
    total = math.fsum(weights)
    weights = [w / total for w in weights]
    order = sorted(range(len(entries)), key=lambda i: (-weights[i], i))
    nucleus: list[int] = []
    cumulative = 0.0
    for i in order:
        nucleus.append(i)
        cumulative += weights[i]
        if cumulative >= (method.top_p or 1.0) - 1e-12:
            break
    rng = random.Random(method.seed)
    pool = [(i, weights[i]) for i in nucleus]
    picked: list[int] = []
    while pool and len(picked) < n:
        total_w = math.fsum(w for _, w in pool)
        draw = rng.random() * total_w
        acc = 0.0
        chosen = len(pool) - 1
        for j, (_, w) in enumerate(pool):
            acc += w
            if draw <= acc:
                chosen = j
                break
        picked.append(pool.pop(chosen)[0])
    return [to_candidate(entries[i]) for i in picked]


def mock_likelihood(world: MockWorld, steps: Sequence[str | Step]) -> tuple[float, int]:
    """Sum of conditional log-probabilities along a path; (0, 0) for the empty path."""
    texts = [s.text if isinstance(s, Step) else s for s in steps]
    prefix: tuple[str, ...] = ()
    logprob = 0.0
    for position, text in enumerate(texts, start=1):
        node = next((k for k in world.children(prefix) if k.step == text), None)
        if node is None:
            raise ValidationError(
                f"step {position} ({text!r}) does not follow {list(prefix)} in the world"
            )
        logprob += math.log(node.prob)
        prefix = prefix + (text,)
    return logprob, len(texts)


def mock_complete(world: MockWorld, prompt: str, params) -> str:
    """Render a sampled root-to-end path as ``Step k:`` lines.

    Sampling follows nucleus parameters when ``params`` provides top_p,
    temperature, and seed; otherwise the walk is greedy. The prompt is not
    interpreted; the world is the sole source of content.
    """
    del prompt
    top_p = getattr(params, "top_p", None)
    temperature = getattr(params, "temperature", None)
    seed = getattr(params, "seed", 0)
    lines: list[str] = []
    prefix: tuple[str, ...] = ()
    for depth in range(1, 10_000):
        if top_p is not None and temperature is not None:
            method = DecodingMethod.nucleus(top_p, temperature, seed=(seed * 1_000_003 + depth))
        else:
            method = DecodingMethod.greedy()
        candidates = mock_propose(world, prefix, 1, method)
        if not candidates or candidates[0].terminal:
            break
        lines.append(f"Step {depth}: {candidates[0].text}")
        prefix = prefix + (candidates[0].text,)
    return "\n".join(lines)


def bundle_from_world(world: MockWorld) -> ScorerBundle:
    """In-process scorer bundle backed by a mock world."""

    def proposer(instance: PlanningInstance, prefix, n: int, method: DecodingMethod):
        del instance
        return mock_propose(world, prefix, n, method)

    def likelihood(instance: PlanningInstance, steps):
        del instance
        return mock_likelihood(world, steps)

    def verifier(goal: str, prefix, candidate: str) -> float:
        del goal
        texts = tuple(s.text if isinstance(s, Step) else s for s in prefix)
        return world.validity(texts, candidate)

    def completion(prompt: str, params) -> str:
        return mock_complete(world, prompt, params)

    return ScorerBundle(proposer, likelihood, verifier, completion)


def random_world(
    seed: int,
    max_depth: int = 5,
    max_branching: int = 4,
    max_leaves: int = 24,
    goal: str | None = None,
) -> MockWorld:
    """Generate a random world whose internal nodes carry no end-of-plan mass.

    Every complete plan therefore ends at a leaf, so the leaf count equals
    the number of complete plans. Probabilities are random but sum to one at
    each internal node; validities are uniform in [0.05, 0.95].
    """
    if max_depth < 1 or max_branching < 1 or max_leaves < 1:
        raise ValidationError("max_depth, max_branching, and max_leaves must be >= 1")
    rng = random.Random(seed)
    serial = count()
    nodes: list[dict] = []

    def grow(prefix: tuple[str, ...], depth: int, leaf_budget: int) -> None:
        branches = rng.randint(1, min(max_branching, leaf_budget))
        # Random composition of the leaf budget over the branches.
        shares = [1] * branches
        for _ in range(leaf_budget - branches):
            shares[rng.randrange(branches)] += 1
        raw = [rng.uniform(0.05, 1.0) for _ in range(branches)]
        total = math.fsum(raw)
        probs = [w / total for w in raw]
        for branch, share in zip(range(branches), shares):
            step = f"s{depth}n{next(serial)}"
            nodes.append(
                {
                    "prefix": list(prefix),
                    "step": step,
                    "prob": probs[branch],
                    "validity": rng.uniform(0.05, 0.95),
                }
            )
            child = prefix + (step,)
            is_leaf = depth + 1 >= max_depth or share == 1 or rng.random() < 0.25
            if not is_leaf:
                grow(child, depth + 1, share)

    budget = rng.randint(2, max_leaves) if max_leaves > 1 else 1
    grow((), 0, budget)
    return MockWorld(nodes, goal=goal or f"mock goal {seed}")
