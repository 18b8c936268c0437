"""Self-check suites: oracle equivalence, contracts, and fixture audits.

Each suite returns a list of check results; the CLI prints one line per
check and the acceptance tests assert on the same results. Reference
answers always come from the independent routines in ``oracles``.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from . import curation, datagen, embodied, oracles, verifier_data
from .core import Goal, Plan, PlanningInstance, TaskKind
from .decoder import BatchItem, DecodeParams, decode, decode_batch
from .errors import ValidationError
from .jsonl import dumps_record
from .scorers.base import DecodingMethod, ScorerBundle
from .scorers.mockworld import MockWorld, bundle_from_world, random_world
from .scorers.remote import RetryPolicy, remote_bundle
from .scorers.server import MockScorerServer

# Critical value of the chi-square distribution at the 1% significance level
# with 167 degrees of freedom (one less than the 168 prompt variants). The
# test suite cross-checks this constant against scipy.
CHI2_CRIT_167_P01 = 212.43129395391728

SUITES = (
    "oracle",
    "rescue",
    "alpha1",
    "parallelism",
    "perturbation",
    "lcs",
    "curation",
    "annotator",
    "prompts",
    "transport",
    "embodied",
)


@dataclass
class CheckResult:
    suite: str
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        suffix = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.suite}: {self.name}{suffix}"


def _asset_path(relative: str) -> Path:
    return Path(str(resources.files("plankit").joinpath(f"assets/{relative}")))


def _world_instance(world: MockWorld, index: int = 0) -> PlanningInstance:
    return PlanningInstance(TaskKind.PLANNING, Goal(world.goal, f"w{index:04d}"))


def _beam_only_params(world: MockWorld, alpha: float, seed: int = 0) -> DecodeParams:
    stats = world.stats()
    k = max(stats["leaves"], 1)
    n = max(stats["max_branching"], 1)
    return DecodeParams(
        alpha=alpha,
        beam_k=k,
        candidates_n=n,
        method_mix=((DecodingMethod.beam(beam_width=n), n),),
        max_steps=stats["depth"] + 2,
        seed=seed,
    )


def _decode_matches_oracle(world: MockWorld, alpha: float, index: int) -> tuple[bool, str]:
    params = _beam_only_params(world, alpha)
    plan, trace = decode(_world_instance(world, index), bundle_from_world(world), params)
    enumerated = oracles.enumerate_complete_plans(world, alpha=alpha, epsilon=params.epsilon)
    best_steps, best_value = oracles.argmax_plan(enumerated)
    if plan.step_texts != best_steps:
        return False, f"world {index}: got {plan.step_texts}, oracle {best_steps}"
    if trace.final_value is None or not math.isclose(
        trace.final_value, best_value, rel_tol=1e-9, abs_tol=1e-12
    ):
        return False, f"world {index}: value {trace.final_value} vs oracle {best_value}"
    if not plan.terminal:
        return False, f"world {index}: plan not terminal"
    return True, ""


def suite_oracle(n_fixtures: int = 200, seed0: int = 0, alpha: float = 0.75) -> list[CheckResult]:
    """Exhaustive-argmax equivalence on shipped and generated worlds."""
    results = []
    start = time.monotonic()
    failures = []
    for name in ("linear3.json", "fork4.json", "verifier_rescue.json"):
        world = MockWorld.load(_asset_path(f"worlds/{name}"))
        ok, detail = _decode_matches_oracle(world, alpha, -1)
        if not ok:
            failures.append(f"{name}: {detail}")
    for i in range(n_fixtures):
        world = random_world(seed0 + i, max_depth=5, max_branching=4, max_leaves=24)
        ok, detail = _decode_matches_oracle(world, alpha, i)
        if not ok:
            failures.append(detail)
    elapsed = time.monotonic() - start
    results.append(
        CheckResult(
            "oracle",
            f"decode equals exhaustive argmax on {n_fixtures} seeded worlds plus shipped fixtures",
            not failures,
            failures[0] if failures else f"{elapsed:.2f}s",
        )
    )
    results.append(
        CheckResult("oracle", "suite runs inside its time budget", elapsed < 10.0, f"{elapsed:.2f}s")
    )
    return results


def suite_rescue() -> list[CheckResult]:
    """Low-validity/high-likelihood branch loses under the default blend and
    wins when the verifier is ignored; both verified against enumeration."""
    world = MockWorld.load(_asset_path("worlds/verifier_rescue.json"))
    instance = _world_instance(world)
    results = []
    outcomes = {}
    for alpha in (0.75, 1.0):
        params = _beam_only_params(world, alpha)
        plan, _ = decode(instance, bundle_from_world(world), params)
        oracle_steps, _ = oracles.argmax_plan(
            oracles.enumerate_complete_plans(world, alpha=alpha, epsilon=params.epsilon)
        )
        outcomes[alpha] = plan.step_texts
        results.append(
            CheckResult(
                "rescue",
                f"alpha={alpha} decode equals enumeration",
                plan.step_texts == oracle_steps,
                f"{plan.step_texts}",
            )
        )
    results.append(
        CheckResult(
            "rescue",
            "alpha=0.75 picks the verified branch",
            outcomes[0.75] == ("fill the water tank", "brew the coffee"),
        )
    )
    results.append(
        CheckResult(
            "rescue",
            "alpha=1 picks the likelihood branch",
            outcomes[1.0] == ("pour the coffee", "refill the mug"),
        )
    )
    return results


def _counting_bundle(world: MockWorld) -> tuple[ScorerBundle, dict]:
    bundle = bundle_from_world(world)
    counter = {"verify": 0}
    inner = bundle.verifier

    def counting_verifier(goal, prefix, candidate):
        counter["verify"] += 1
        return inner(goal, prefix, candidate)

    return replace(bundle, verifier=counting_verifier), counter


def suite_alpha1(n_fixtures: int = 50, seed0: int = 1000) -> list[CheckResult]:
    """With alpha=1 the verifier is never called and the result matches a
    plain likelihood-only step-wise beam search."""
    verifier_calls = 0
    mismatches = []
    for i in range(n_fixtures):
        world = random_world(seed0 + i, max_depth=5, max_branching=4, max_leaves=24)
        stats = world.stats()
        # Run wide (no pruning) and narrow (beam pruning active) configurations.
        configs = ((max(stats["leaves"], 1), max(stats["max_branching"], 1)), (2, 2))
        for k, n in configs:
            params = DecodeParams(
                alpha=1.0,
                beam_k=k,
                candidates_n=n,
                method_mix=((DecodingMethod.beam(beam_width=n), n),),
                max_steps=stats["depth"] + 2,
            )
            bundle, counter = _counting_bundle(world)
            plan, trace = decode(_world_instance(world, i), bundle, params)
            verifier_calls += counter["verify"]
            ref_steps, ref_value, ref_complete = oracles.likelihood_beam_search(
                world, params.beam_k, params.candidates_n, params.max_steps
            )
            if plan.step_texts != ref_steps or plan.terminal != ref_complete:
                mismatches.append(f"world {i} k={k}: {plan.step_texts} vs {ref_steps}")
            elif trace.final_value is None or not math.isclose(
                trace.final_value, ref_value, rel_tol=1e-9
            ):
                mismatches.append(f"world {i} k={k}: value {trace.final_value} vs {ref_value}")
    return [
        CheckResult("alpha1", "verifier invocation count is zero", verifier_calls == 0,
                    f"{verifier_calls} calls"),
        CheckResult(
            "alpha1",
            f"decode matches likelihood-only beam search on {n_fixtures} fixtures",
            not mismatches,
            mismatches[0] if mismatches else "",
        ),
    ]


def _routing_bundle(worlds: dict[str, MockWorld]) -> ScorerBundle:
    """Dispatch scorer calls to one world per instance.

    Proposer and likelihood route by the instance goal id; the verifier only
    sees goal text, so worlds must carry distinct goal texts.
    """
    bundles = {key: bundle_from_world(world) for key, world in worlds.items()}
    by_goal_text = {world.goal: bundles[key] for key, world in worlds.items()}
    if len(by_goal_text) != len(worlds):
        raise ValidationError("routing bundle requires distinct goal texts")

    def proposer(instance, prefix, n, method):
        return bundles[instance.goal.id].proposer(instance, prefix, n, method)

    def likelihood(instance, steps):
        return bundles[instance.goal.id].likelihood(instance, steps)

    def verifier(goal, prefix, candidate):
        return by_goal_text[goal].verifier(goal, prefix, candidate)

    return ScorerBundle(proposer, likelihood, verifier)


def _batch_fingerprint(items: list[BatchItem]) -> str:
    lines = []
    for item in items:
        record = {
            "index": item.index,
            "error": item.error,
            "plan": list(item.plan.step_texts) if item.plan else None,
            "terminal": item.plan.terminal if item.plan else None,
            "trace": [r for r in item.trace.to_records()] if item.trace else None,
            "value": item.trace.final_value if item.trace else None,
        }
        lines.append(dumps_record(record))
    return "\n".join(lines)


def suite_parallelism(n_fixtures: int = 50, seed0: int = 2000) -> list[CheckResult]:
    """decode_batch output bytes are identical for parallelism 1, 4, and 8."""
    worlds = {}
    instances = []
    for i in range(n_fixtures):
        world = random_world(seed0 + i, max_depth=4, max_branching=3, max_leaves=12)
        key = f"w{i:04d}"
        worlds[key] = world
        instances.append(PlanningInstance(TaskKind.PLANNING, Goal(world.goal, key)))
    bundle = _routing_bundle(worlds)
    params = DecodeParams(
        alpha=0.75,
        beam_k=4,
        candidates_n=3,
        method_mix=(
            (DecodingMethod.beam(beam_width=2), 2),
            (DecodingMethod.nucleus(top_p=0.9, temperature=1.0), 1),
        ),
        max_steps=8,
        seed=7,
    )
    prints = {
        parallelism: _batch_fingerprint(decode_batch(instances, bundle, params, parallelism))
        for parallelism in (1, 4, 8)
    }
    ok = prints[1] == prints[4] == prints[8]
    return [
        CheckResult(
            "parallelism",
            f"batch outputs byte-identical across parallelism 1/4/8 on {n_fixtures} fixtures",
            ok,
        )
    ]


def synthetic_plans(
    n: int, seed: int, min_len: int = 2, max_len: int = 10
) -> list[tuple[Goal, Plan]]:
    """Random distinct-step plans for perturbation checks."""
    rng = random.Random(seed)
    items = []
    for i in range(n):
        length = rng.randint(min_len, max_len)
        goal = Goal(f"goal number {i}", f"p{i:05d}")
        steps = [f"do thing {i} part {t} v{rng.randrange(1_000_000)}" for t in range(1, length + 1)]
        items.append((goal, Plan.from_texts(steps)))
    return items


def _audit_negative(example: verifier_data.VerifierExample, plan_texts: tuple[str, ...]) -> str:
    """Re-derive the eligibility rule for one negative; empty string when fine."""
    kind = example.kind
    prefix = example.prefix_texts
    cand = example.candidate.text
    t = len(prefix) + 1
    if kind is verifier_data.PerturbationKind.REPEAT_NEAR:
        if t < 2 or prefix != plan_texts[: t - 1] or cand != plan_texts[t - 2]:
            return f"repeat-near violated at t={t}"
    elif kind is verifier_data.PerturbationKind.REPEAT_DISTANT:
        if t < 3 or prefix != plan_texts[: t - 1] or cand not in plan_texts[: t - 2]:
            return f"repeat-distant violated at t={t}"
    elif kind is verifier_data.PerturbationKind.MISSING:
        if prefix != plan_texts[: t - 1] or cand not in plan_texts[t + 1 :]:
            return f"missing violated at t={t}"
    elif kind is verifier_data.PerturbationKind.REORDER_NEAR:
        base = plan_texts[: t - 1]
        swapped = any(
            list(prefix)
            == list(base[: j - 1]) + [base[j], base[j - 1]] + list(base[j + 1 :])
            for j in range(1, len(base))
        )
        if not swapped or cand != plan_texts[t - 1]:
            return f"reorder-near violated at t={t}"
    elif kind is verifier_data.PerturbationKind.REORDER_DISTANT:
        base = plan_texts[: t - 1]
        found_gap2 = False
        diffs = [idx for idx, (a, b) in enumerate(zip(prefix, base)) if a != b]
        if len(diffs) == 2 and diffs[1] - diffs[0] >= 2:
            i, j = diffs
            found_gap2 = prefix[i] == base[j] and prefix[j] == base[i]
        if not found_gap2 or cand != plan_texts[t - 1]:
            return f"reorder-distant violated at t={t}"
    else:
        return f"unknown kind {kind}"
    return ""


def suite_perturbation(n_plans: int = 1000, seed: int = 31) -> list[CheckResult]:
    """Eligibility, collision, and determinism invariants on random plans,
    plus the reproducible target-scale build from 3000 plans."""
    results = []
    problems = []
    items = synthetic_plans(n_plans, seed)
    for goal, plan in items:
        pos = verifier_data.positives(plan, goal)
        if len(pos) != len(plan):
            problems.append(f"{goal.id}: expected {len(plan)} positives, got {len(pos)}")
            continue
        valid_pairs = {(e.prefix_texts, e.candidate.text) for e in pos}
        neg_a = verifier_data.negatives(plan, goal, seed=seed)
        neg_b = verifier_data.negatives(plan, goal, seed=seed)
        if neg_a != neg_b:
            problems.append(f"{goal.id}: negatives not deterministic under the seed")
            continue
        for example in neg_a:
            if (example.prefix_texts, example.candidate.text) in valid_pairs:
                problems.append(f"{goal.id}: invalid pair collides with a valid pair")
                break
            audit = _audit_negative(example, plan.step_texts)
            if audit:
                problems.append(f"{goal.id}: {audit}")
                break
    results.append(
        CheckResult(
            "perturbation",
            f"invariants hold on {n_plans} random plans",
            not problems,
            problems[0] if problems else "",
        )
    )
    scale_items = synthetic_plans(3000, seed=77)
    examples, manifest = verifier_data.build_dataset(scale_items)
    _, manifest_again = verifier_data.build_dataset(scale_items)
    results.append(
        CheckResult(
            "perturbation",
            "3000-plan build is reproducible and lands within 10% of the target scale",
            manifest == manifest_again
            and manifest["within_tolerance"]
            and manifest["total"] == len(examples),
            f"total={manifest['total']} target={manifest['target_total']}",
        )
    )
    return results


def suite_lcs(n_pairs: int = 1000, seed: int = 5) -> list[CheckResult]:
    """Iterative scorer equals the recursive reference on random programs."""
    rng = random.Random(seed)
    verbs = ["grab", "walk_to", "open", "close", "switch_on"]
    objects = ["cup", "tv", "fridge", "book", "milk"]

    def random_program(length: int) -> list[embodied.GroundedAction]:
        return [
            embodied.GroundedAction(rng.choice(verbs), (rng.choice(objects),))
            for _ in range(length)
        ]

    mismatches = []
    for i in range(n_pairs):
        a = random_program(rng.randint(0, 20))
        b = random_program(rng.randint(0, 20))
        got = embodied.lcs_score(a, b)
        n = oracles.lcs_length_recursive(a, b)
        expected = 1.0 if not a and not b else (0.0 if not a or not b else n / max(len(a), len(b)))
        if got != expected:
            mismatches.append(f"pair {i}: {got} vs {expected}")
    worked = embodied.lcs_score(
        [embodied.GroundedAction(v) for v in "ABCD"],
        [embodied.GroundedAction(v) for v in "ACBD"],
    )
    return [
        CheckResult(
            "lcs",
            f"{n_pairs} random pairs match the recursive reference exactly",
            not mismatches,
            mismatches[0] if mismatches else "",
        ),
        CheckResult("lcs", "worked example scores 0.75", worked == 0.75, f"{worked}"),
    ]


def suite_curation(seed: int = 11) -> list[CheckResult]:
    """Threshold partition on the shipped fixture, the worked PR example,
    and recall monotonicity on random scored sets."""
    results = []
    records = curation.read_curation_records(_asset_path("fixtures/curation_100.jsonl"))
    policy = curation.ThresholdPolicy()
    outcome = curation.curate(records, policy)
    expected_accepted = [
        (r.tuple_kind, r.critic_score)
        for r in records
        if r.critic_score >= policy.for_kind(r.tuple_kind)
    ]
    expected_rejected = [
        (r.tuple_kind, r.critic_score)
        for r in records
        if r.critic_score < policy.for_kind(r.tuple_kind)
    ]
    partition_ok = (
        len(records) == 100
        and not outcome.pending
        and [(r.tuple_kind, r.critic_score) for r in outcome.accepted] == expected_accepted
        and [(r.tuple_kind, r.critic_score) for r in outcome.rejected] == expected_rejected
        and all(r.decision == curation.ACCEPTED for r in outcome.accepted)
        and all(r.decision == curation.REJECTED for r in outcome.rejected)
    )
    # The fixture includes records sitting exactly on each threshold; the
    # boundary counts as accept.
    boundary = [r for r in records if r.critic_score == policy.for_kind(r.tuple_kind)]
    boundary_ok = len(boundary) >= 3 and all(
        (r.tuple_kind, r.critic_score) in set(expected_accepted) for r in boundary
    )
    results.append(
        CheckResult(
            "curation",
            "default thresholds partition the 100-record fixture per the >= rule",
            partition_ok and boundary_ok,
            f"accepted={len(outcome.accepted)} rejected={len(outcome.rejected)}",
        )
    )
    worked = curation.pr_curve(
        [
            curation.CurationRecord("plan", {}, 0.9, label="valid"),
            curation.CurationRecord("plan", {}, 0.8, label="invalid"),
            curation.CurationRecord("plan", {}, 0.4, label="valid"),
        ],
        thresholds=[0.7],
    )[0]
    results.append(
        CheckResult(
            "curation",
            "worked 3-record example gives precision 0.5 and recall 0.5",
            worked.precision == 0.5 and worked.recall == 0.5 and worked.accepted_count == 2,
        )
    )
    rng = random.Random(seed)
    monotone = True
    for _ in range(1000):
        size = rng.randint(1, 30)
        sample = [
            curation.CurationRecord(
                "plan", {}, round(rng.random(), 3), label=rng.choice(["valid", "invalid"])
            )
            for _ in range(size)
        ]
        points = curation.pr_curve(sample, thresholds=[i / 20 for i in range(21)])
        recalls = [p.recall for p in points if not math.isnan(p.recall)]
        counts = [p.accepted_count for p in points]
        if any(a < b for a, b in zip(recalls, recalls[1:])) or any(
            a < b for a, b in zip(counts, counts[1:])
        ):
            monotone = False
            break
    results.append(
        CheckResult(
            "curation",
            "recall and accepted count are non-increasing in tau on 1000 random sets",
            monotone,
        )
    )
    return results


def suite_annotator() -> list[CheckResult]:
    """All 4096 rating bundles agree with the independent count-based rule."""
    mismatches = 0
    triples = list(itertools.product((0, 1), repeat=3))
    for ach in triples:
        for top in triples:
            for order in triples:
                for comp in triples:
                    bundle = curation.AnnotationBundle(ach, top, order, comp)
                    got = curation.aggregate_plan_validity(bundle)
                    expected = oracles.plan_validity_by_counts(ach, top, order, comp)
                    if got != expected:
                        mismatches += 1
    return [
        CheckResult(
            "annotator",
            "exhaustive 2^12 bundle sweep matches the count-based rule",
            mismatches == 0,
            f"{mismatches} mismatches",
        )
    ]


def suite_prompts(draws: int = 100_000) -> list[CheckResult]:
    """Prompt randomizer range and uniformity."""
    universe = datagen.all_prefixes()
    results = [
        CheckResult(
            "prompts",
            "enumeration yields exactly 168 distinct instruction prefixes",
            len(universe) == 168 and len(set(universe)) == 168,
            f"{len(set(universe))}",
        )
    ]
    counts: dict[str, int] = {prefix: 0 for prefix in universe}
    for seed in range(draws):
        counts[datagen.randomized_prefix(seed)] += 1
    expected = draws / len(universe)
    statistic = sum((c - expected) ** 2 / expected for c in counts.values())
    results.append(
        CheckResult(
            "prompts",
            f"chi-square uniformity over {draws} draws passes at 1% significance",
            statistic < CHI2_CRIT_167_P01,
            f"stat={statistic:.2f} crit={CHI2_CRIT_167_P01:.2f}",
        )
    )
    return results


def suite_transport(n_fixtures: int = 20, seed0: int = 3000) -> list[CheckResult]:
    """Loopback-served decoding equals in-process decoding byte for byte."""
    mismatches = []
    for i in range(n_fixtures):
        world = random_world(seed0 + i, max_depth=4, max_branching=3, max_leaves=10)
        instance = _world_instance(world, i)
        params = _beam_only_params(world, alpha=0.75, seed=13)
        local_items = decode_batch([instance], bundle_from_world(world), params)
        with MockScorerServer(world) as server:
            bundle = remote_bundle(server.address, retry=RetryPolicy(attempts=2, backoff_s=0.01))
            try:
                remote_items = decode_batch([instance], bundle, params)
            finally:
                if bundle.close:
                    bundle.close()
        if _batch_fingerprint(local_items) != _batch_fingerprint(remote_items):
            mismatches.append(f"world {i}")
    return [
        CheckResult(
            "transport",
            f"loopback decode equals in-process decode on {n_fixtures} fixtures",
            not mismatches,
            mismatches[0] if mismatches else "",
        )
    ]


def suite_embodied() -> list[CheckResult]:
    """Gold programs run clean and the identity pipeline scores perfectly."""
    env = embodied.MiniEnv.load(_asset_path("envs/mini_home.json"))
    golds = embodied.load_golds(_asset_path("golds/mini_home_golds.jsonl"))
    vocab = embodied.ActionVocab.from_env(env)
    fraction = embodied.executability([g["program"] for g in golds], env)
    results = [
        CheckResult(
            "embodied",
            "bundled gold programs are 100% executable",
            fraction == 1.0,
            f"{fraction:.2%}",
        )
    ]
    plans = [
        (g["goal_id"], [vocab.surface_of(action) for action in g["program"]]) for g in golds
    ]
    report = embodied.evaluate(plans, env, vocab, golds)
    results.append(
        CheckResult(
            "embodied",
            "identity pipeline scores executability 1.0 and mean lcs 1.0",
            report.executability == 1.0 and report.mean_lcs == 1.0,
            f"exe={report.executability} lcs={report.mean_lcs}",
        )
    )
    return results


_SUITE_FUNCTIONS = {
    "oracle": suite_oracle,
    "rescue": suite_rescue,
    "alpha1": suite_alpha1,
    "parallelism": suite_parallelism,
    "perturbation": suite_perturbation,
    "lcs": suite_lcs,
    "curation": suite_curation,
    "annotator": suite_annotator,
    "prompts": suite_prompts,
    "transport": suite_transport,
    "embodied": suite_embodied,
}


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        results = []
        for suite in SUITES:
            results.extend(_SUITE_FUNCTIONS[suite]())
        return results
    if name not in _SUITE_FUNCTIONS:
        raise ValidationError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    return _SUITE_FUNCTIONS[name]()
