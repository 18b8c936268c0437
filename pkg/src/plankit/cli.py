"""Operator command line: decode, gen-negatives, curate, datagen,
eval-embodied, bench, and serve-mock.

Every run writes a fresh timestamped directory under ``--out`` containing
its artifacts plus a manifest with the effective configuration and input
digests. Exit codes: 0 success, 1 runtime failure, 2 configuration error.
Flags mirror configuration field names; environment variables of the form
``PLANKIT_<FIELD>`` override config files and are overridden by flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, bench, curation, datagen, embodied, verifier_data
from .core import (
    Goal,
    Plan,
    PlanningInstance,
    TaskKind,
    instance_to_record,
    read_instances,
)
from .decoder import DecodeParams, decode_batch, default_method_mix
from .errors import FixtureError, PlankitError, ValidationError
from .figures import save_decode_values, save_embodied_scores, save_pr_curve
from .jsonl import write_jsonl
from .manifest import new_run_dir, write_manifest
from .scorers.base import DecodingMethod
from .scorers.mockworld import MockWorld, bundle_from_world
from .scorers.remote import remote_bundle
from .scorers.server import MockScorerServer

ENV_PREFIX = "PLANKIT_"

DECODE_FIELDS = ("alpha", "beam_k", "candidates_n", "max_steps", "epsilon", "seed")


def _env_value(field: str) -> str | None:
    return os.environ.get(ENV_PREFIX + field.upper())


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValidationError("config file must hold a JSON object")
    return config


def _method_mix_from_config(raw, default_n: int) -> tuple[tuple[DecodingMethod, int], ...]:
    if raw is None:
        return default_method_mix()
    if isinstance(raw, str):
        raw = json.loads(raw)
    mix = []
    for item in raw:
        count = int(item["count"])
        method = DecodingMethod.from_wire({k: v for k, v in item.items() if k != "count"})
        mix.append((method, count))
    del default_n
    return tuple(mix)


def _resolve_decode_params(args) -> DecodeParams:
    config = _load_config_file(getattr(args, "config", None))
    merged: dict = {}
    for field in DECODE_FIELDS:
        value = getattr(args, field, None)
        if value is None:
            env = _env_value(field)
            value = env if env is not None else config.get(field)
        if value is not None:
            cast = int if field in ("beam_k", "candidates_n", "max_steps", "seed") else float
            merged[field] = cast(value)
    mix_raw = getattr(args, "method_mix", None)
    if mix_raw is None:
        mix_raw = _env_value("method_mix") or config.get("method_mix")
    candidates_n = merged.get("candidates_n", 10)
    if mix_raw is None and candidates_n != 10:
        raise ValidationError(
            "candidates_n differs from the default mix total; pass --method-mix as well"
        )
    merged["method_mix"] = _method_mix_from_config(mix_raw, candidates_n)
    return DecodeParams(**merged)


def _params_to_config(params: DecodeParams) -> dict:
    return {
        "alpha": params.alpha,
        "beam_k": params.beam_k,
        "candidates_n": params.candidates_n,
        "method_mix": [dict(m.to_wire(), count=c) for m, c in params.method_mix],
        "max_steps": params.max_steps,
        "epsilon": params.epsilon,
        "seed": params.seed,
        "verifier_mode": params.verifier_mode,
    }


def _open_scorer(spec: str):
    """Returns (bundle, world or None). ``mock:<path>`` or an http(s) URL."""
    if spec.startswith("mock:"):
        world = MockWorld.load(spec[len("mock:") :])
        return bundle_from_world(world), world
    if spec.startswith("http://") or spec.startswith("https://"):
        return remote_bundle(spec), None
    raise ValidationError(f"scorer must be 'mock:<fixture>' or an http(s) URL, got {spec!r}")


def _run_dir(args, command: str) -> Path:
    if getattr(args, "run_dir", None):
        path = Path(args.run_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return new_run_dir(args.out, command)


def cmd_decode(args) -> int:
    params = _resolve_decode_params(args)
    bundle, world = _open_scorer(args.scorer)
    inputs: dict[str, str] = {}
    if args.scorer.startswith("mock:"):
        inputs["world"] = args.scorer[len("mock:") :]
    if args.instances:
        instances = [instance for instance, _ in read_instances(args.instances)]
        inputs["instances"] = args.instances
    elif world is not None:
        instances = [PlanningInstance(TaskKind.PLANNING, Goal(world.goal))]
    else:
        raise ValidationError("--instances is required with a remote scorer")
    run_dir = _run_dir(args, "decode")
    items = decode_batch(instances, bundle, params, parallelism=args.parallelism)
    plan_records = []
    trace_records = []
    error_records = []
    for instance, item in zip(instances, items):
        if item.error is not None:
            error_records.append({"id": instance.goal.id, "error": item.error})
            continue
        record = instance_to_record(instance, item.plan)
        record["terminal"] = item.plan.terminal
        record["value"] = item.trace.final_value
        plan_records.append(record)
        trace_records.extend(item.trace.to_records())
    write_jsonl(run_dir / "plans.jsonl", plan_records)
    write_jsonl(run_dir / "traces.jsonl", trace_records)
    if error_records:
        write_jsonl(run_dir / "errors.jsonl", error_records)
    save_decode_values(trace_records, run_dir / "values.png")
    write_manifest(
        run_dir,
        "decode",
        dict(_params_to_config(params), scorer=args.scorer, parallelism=args.parallelism),
        inputs,
    )
    print(f"decoded {len(plan_records)} plan(s), {len(error_records)} error(s) -> {run_dir}")
    if bundle.close:
        bundle.close()
    return 1 if error_records else 0


def cmd_gen_negatives(args) -> int:
    items = read_instances(args.plans)
    pairs = []
    for instance, plan in items:
        if plan is None:
            raise ValidationError(f"record {instance.goal.id} has no plan")
        pairs.append((instance.goal, plan))
    kinds = tuple(
        verifier_data.PerturbationKind(k.strip()) for k in args.kinds.split(",") if k.strip()
    )
    config = verifier_data.DatasetConfig(
        kinds=kinds or verifier_data.ALL_KINDS,
        per_kind=args.per_kind,
        seed=args.seed if args.seed is not None else 0,
        target_total=args.target_total,
    )
    run_dir = _run_dir(args, "gen-negatives")
    examples, manifest = verifier_data.build_dataset(pairs, config)
    verifier_data.write_dataset(run_dir / "dataset.jsonl", examples, manifest)
    write_manifest(
        run_dir,
        "gen-negatives",
        {
            "kinds": [k.value for k in config.kinds],
            "per_kind": config.per_kind,
            "seed": config.seed,
            "target_total": config.target_total,
        },
        {"plans": args.plans},
    )
    print(
        f"wrote {manifest['total']} pairs ({manifest['positives']} valid / "
        f"{manifest['negatives']} invalid) -> {run_dir}"
    )
    return 0


def cmd_curate(args) -> int:
    records = curation.read_curation_records(args.records)
    if args.kind:
        records = [r for r in records if r.tuple_kind == args.kind]
        if not records:
            raise ValidationError(f"no records of kind {args.kind!r} in {args.records}")
    policy = curation.ThresholdPolicy(
        plan=args.tau_plan, condition=args.tau_condition, counterfactual=args.tau_counterfactual
    )
    run_dir = _run_dir(args, "curate")
    outcome = curation.curate(records, policy)
    curation.write_curation_records(run_dir / "accepted.jsonl", outcome.accepted)
    curation.write_curation_records(run_dir / "rejected.jsonl", outcome.rejected)
    if outcome.pending:
        curation.write_curation_records(run_dir / "pending.jsonl", outcome.pending)
    labeled = [r for r in records if r.label is not None and r.critic_score is not None]
    if labeled:
        points = curation.pr_curve(labeled)
        curation.write_pr_report(run_dir / "pr_report.tsv", points)
        save_pr_curve(points, run_dir / "pr_curve.png")
    write_manifest(
        run_dir,
        "curate",
        {
            "tau_plan": policy.plan,
            "tau_condition": policy.condition,
            "tau_counterfactual": policy.counterfactual,
            "kind": args.kind,
        },
        {"records": args.records},
    )
    print(
        f"accepted {len(outcome.accepted)}, rejected {len(outcome.rejected)}, "
        f"pending {len(outcome.pending)} -> {run_dir}"
    )
    return 0


def _completion_from_spec(spec: str):
    if spec.startswith("mock:"):
        world = MockWorld.load(spec[len("mock:") :])
        return bundle_from_world(world).completion
    if spec.startswith("http://") or spec.startswith("https://"):
        return remote_bundle(spec).completion
    raise ValidationError(f"completion must be 'mock:<fixture>' or an http(s) URL, got {spec!r}")


def cmd_datagen(args) -> int:
    params = datagen.SamplingParams(
        top_p=args.top_p,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        seed=args.seed if args.seed is not None else 0,
    )
    completion = _completion_from_spec(args.completion)
    run_dir = _run_dir(args, "datagen")
    inputs: dict[str, str] = {}
    if args.mode == "goals":
        if not args.pool:
            raise ValidationError("--pool is required in goals mode")
        pool = datagen.GoalPool.load(args.pool)
        inputs["pool"] = args.pool
        before = len(pool)
        datagen.bootstrap_goals(pool, completion, rounds=args.rounds, batch=args.batch, params=params)
        pool.save(run_dir / "goal_pool.jsonl")
        print(f"pool grew {before} -> {len(pool)} goals -> {run_dir}")
    elif args.mode in ("conditions", "counterfactuals"):
        if not args.instances:
            raise ValidationError(f"--instances is required in {args.mode} mode")
        items = read_instances(args.instances)
        inputs["instances"] = args.instances
        outputs = []
        for instance, plan in items:
            if plan is None:
                raise ValidationError(f"record {instance.goal.id} has no plan to work from")
            if args.mode == "conditions":
                conditions = datagen.sample_conditions(
                    instance.goal, plan, completion, params=params
                )
                for condition in conditions:
                    outputs.append(
                        {
                            "id": instance.goal.id,
                            "goal": instance.goal.text,
                            "condition": condition.text,
                            "category": condition.category.value if condition.category else None,
                        }
                    )
            else:
                if instance.condition is None:
                    raise ValidationError(
                        f"record {instance.goal.id} needs a condition for counterfactuals"
                    )
                revised = datagen.sample_counterfactual(
                    instance.goal, plan, instance.condition, completion, params=params
                )
                record = instance_to_record(instance, plan)
                record["counterfactual_plan"] = list(revised.step_texts)
                outputs.append(record)
        name = "conditions.jsonl" if args.mode == "conditions" else "counterfactuals.jsonl"
        write_jsonl(run_dir / name, outputs)
        print(f"wrote {len(outputs)} record(s) -> {run_dir}")
    else:
        raise ValidationError(f"unknown datagen mode {args.mode!r}")
    write_manifest(
        run_dir,
        "datagen",
        {
            "mode": args.mode,
            "completion": args.completion,
            "rounds": args.rounds,
            "batch": args.batch,
            "top_p": params.top_p,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        },
        inputs,
    )
    return 0


def cmd_eval_embodied(args) -> int:
    env = embodied.MiniEnv.load(args.env)
    vocab = embodied.ActionVocab.from_env(env)
    golds = embodied.load_golds(args.golds)
    items = read_instances(args.plans)
    plans = []
    for instance, plan in items:
        if plan is None:
            raise ValidationError(f"record {instance.goal.id} has no plan")
        plans.append((instance.goal.id, list(plan.step_texts)))
    run_dir = _run_dir(args, "eval-embodied")
    report = embodied.evaluate(
        plans, env, vocab, golds, config=embodied.EvalConfig(min_similarity=args.min_similarity)
    )
    write_jsonl(run_dir / "report.jsonl", report.to_records())
    with open(run_dir / "aggregate.json", "w", encoding="utf-8") as handle:
        json.dump(report.aggregate(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    save_embodied_scores(report.records, run_dir / "scores.png")
    write_manifest(
        run_dir,
        "eval-embodied",
        {"min_similarity": args.min_similarity},
        {"plans": args.plans, "env": args.env, "golds": args.golds},
    )
    print(
        f"executability {report.executability:.2%}, mean lcs {report.mean_lcs:.4f} -> {run_dir}"
    )
    return 0


def cmd_bench(args) -> int:
    results = bench.run_suite(args.suite)
    run_dir = _run_dir(args, "bench")
    write_jsonl(
        run_dir / "results.jsonl",
        [{"suite": r.suite, "name": r.name, "ok": r.ok, "detail": r.detail} for r in results],
    )
    write_manifest(run_dir, "bench", {"suite": args.suite}, {})
    for result in results:
        print(result.line())
    failed = sum(1 for r in results if not r.ok)
    print(f"{len(results) - failed}/{len(results)} checks passed -> {run_dir}")
    return 1 if failed else 0


def cmd_serve_mock(args) -> int:
    world = MockWorld.load(args.world)
    try:
        server = MockScorerServer(world, host=args.host, port=args.port)
    except OSError as exc:
        print(f"bind failed: {exc}", file=sys.stderr)
        return 1
    print(f"serving {args.world} at {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plankit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"plankit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default="runs", help="base directory for run outputs")
        p.add_argument("--run-dir", default=None, help="exact output directory (overrides --out)")
        p.add_argument("--seed", type=int, default=None, help="global seed")

    p = sub.add_parser("decode", help="guided step-wise beam search over a scorer")
    add_common(p)
    p.add_argument("--scorer", required=True, help="mock:<fixture.json> or http(s) endpoint")
    p.add_argument("--instances", default=None, help="instance records, one JSON per line")
    p.add_argument("--config", default=None, help="decode configuration JSON file")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beam-k", "--k", dest="beam_k", type=int, default=None)
    p.add_argument("--candidates-n", "--n", dest="candidates_n", type=int, default=None)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--method-mix", dest="method_mix", default=None,
                   help='JSON list like [{"kind":"beam","beam_width":5,"count":5}]')
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gen-negatives", help="build verifier training pairs from gold plans")
    add_common(p)
    p.add_argument("--plans", required=True, help="instance records carrying plans")
    p.add_argument("--per-kind", dest="per_kind", type=int, default=2)
    p.add_argument("--kinds", default=",".join(k.value for k in verifier_data.ALL_KINDS))
    p.add_argument("--target-total", dest="target_total", type=int, default=47_000)
    p.set_defaults(func=cmd_gen_negatives)

    p = sub.add_parser("curate", help="threshold-filter generated tuples by critic score")
    add_common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--kind", choices=curation.TUPLE_KINDS, default=None)
    p.add_argument("--tau-plan", dest="tau_plan", type=float, default=0.65)
    p.add_argument("--tau-condition", dest="tau_condition", type=float, default=0.76)
    p.add_argument("--tau-counterfactual", dest="tau_counterfactual", type=float, default=0.82)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("datagen", help="goal bootstrapping and condition/counterfactual sampling")
    add_common(p)
    p.add_argument("--mode", choices=("goals", "conditions", "counterfactuals"), required=True)
    p.add_argument("--completion", required=True, help="mock:<fixture.json> or http(s) endpoint")
    p.add_argument("--pool", default=None, help="seed goal pool (goals mode)")
    p.add_argument("--instances", default=None, help="instance records (conditions/counterfactuals)")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--top-p", dest="top_p", type=float, default=0.98)
    p.add_argument("--temperature", type=float, default=0.9)
    p.add_argument("--max-tokens", dest="max_tokens", type=int, default=256)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("eval-embodied", help="translate, simulate, and score plans")
    add_common(p)
    p.add_argument("--plans", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--golds", required=True)
    p.add_argument("--min-similarity", dest="min_similarity", type=float, default=0.0)
    p.set_defaults(func=cmd_eval_embodied)

    p = sub.add_parser("bench", help="run the self-check suites")
    add_common(p)
    p.add_argument("--suite", default="all", choices=bench.SUITES + ("all",))
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve-mock", help="serve a mock world over the wire protocol")
    add_common(p)
    p.add_argument("--world", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8763)
    p.set_defaults(func=cmd_serve_mock)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FixtureError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PlankitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
