import json
from importlib import resources
from pathlib import Path

import pytest

from plankit.cli import main
from plankit.core import Goal, Plan, PlanningInstance, TaskKind, write_instances
from plankit.curation import CurationRecord, write_curation_records
from plankit.jsonl import read_jsonl, sha256_file
from plankit.scorers.mockworld import MockWorld, random_world
from plankit.scorers.server import MockScorerServer


def asset(relative):
    return str(resources.files("plankit").joinpath(f"assets/{relative}"))


@pytest.fixture
def world_file(tmp_path):
    path = tmp_path / "world.json"
    random_world(11, max_depth=4, max_branching=3, max_leaves=8).save(path)
    return path


def run(args):
    return main([str(a) for a in args])


class TestDecodeCommand:
    def test_mock_decode_writes_artifacts(self, tmp_path, world_file):
        run_dir = tmp_path / "run"
        code = run(
            ["decode", "--scorer", f"mock:{world_file}", "--alpha", "0.75",
             "--k", "5", "--n", "10", "--run-dir", run_dir]
        )
        assert code == 0
        plans = read_jsonl(run_dir / "plans.jsonl")
        assert len(plans) == 1
        assert plans[0]["terminal"] is True
        assert (run_dir / "traces.jsonl").exists()
        assert (run_dir / "values.png").exists()
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["command"] == "decode"
        assert manifest["config"]["alpha"] == 0.75
        assert "plans.jsonl" in manifest["outputs"]

    def test_instances_file_and_env_override(self, tmp_path, world_file, monkeypatch):
        world = MockWorld.load(world_file)
        instances = tmp_path / "instances.jsonl"
        write_instances(
            instances,
            [(PlanningInstance(TaskKind.PLANNING, Goal(world.goal, "case1")), None)],
        )
        monkeypatch.setenv("PLANKIT_ALPHA", "1.0")
        run_dir = tmp_path / "run"
        code = run(
            ["decode", "--scorer", f"mock:{world_file}", "--instances", instances,
             "--run-dir", run_dir]
        )
        assert code == 0
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["config"]["alpha"] == 1.0
        assert read_jsonl(run_dir / "plans.jsonl")[0]["id"] == "case1"

    def test_flag_beats_env(self, tmp_path, world_file, monkeypatch):
        monkeypatch.setenv("PLANKIT_ALPHA", "1.0")
        run_dir = tmp_path / "run"
        run(["decode", "--scorer", f"mock:{world_file}", "--alpha", "0.5",
             "--run-dir", run_dir])
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["config"]["alpha"] == 0.5

    def test_rerun_is_byte_identical(self, tmp_path, world_file):
        digests = []
        for name in ("one", "two"):
            run_dir = tmp_path / name
            assert run(["decode", "--scorer", f"mock:{world_file}", "--seed", 9,
                        "--run-dir", run_dir]) == 0
            digests.append(
                {
                    p.name: sha256_file(p)
                    for p in sorted(run_dir.iterdir())
                }
            )
        assert digests[0] == digests[1]

    def test_inputs_never_mutated(self, tmp_path, world_file):
        before = sha256_file(world_file)
        run(["decode", "--scorer", f"mock:{world_file}", "--run-dir", tmp_path / "r"])
        assert sha256_file(world_file) == before

    def test_bad_scorer_spec_exits_2(self, tmp_path):
        assert run(["decode", "--scorer", "ftp://nope", "--run-dir", tmp_path / "r"]) == 2

    def test_missing_world_file_exits_2(self, tmp_path):
        assert run(
            ["decode", "--scorer", f"mock:{tmp_path}/absent.json", "--run-dir", tmp_path / "r"]
        ) == 2


class TestServeMockTransparency:
    def test_loopback_equals_in_process(self, tmp_path, world_file):
        local_dir = tmp_path / "local"
        assert run(["decode", "--scorer", f"mock:{world_file}", "--seed", 4,
                    "--run-dir", local_dir]) == 0
        world = MockWorld.load(world_file)
        with MockScorerServer(world) as server:
            instances = tmp_path / "instances.jsonl"
            write_instances(
                instances,
                [(PlanningInstance(TaskKind.PLANNING, Goal(world.goal)), None)],
            )
            remote_dir = tmp_path / "remote"
            assert run(["decode", "--scorer", server.address, "--seed", 4,
                        "--instances", instances, "--run-dir", remote_dir]) == 0
        local = (local_dir / "plans.jsonl").read_bytes()
        remote = (remote_dir / "plans.jsonl").read_bytes()
        assert local == remote
        assert (local_dir / "traces.jsonl").read_bytes() == (remote_dir / "traces.jsonl").read_bytes()


class TestGenNegativesCommand:
    def test_dataset_and_manifest(self, tmp_path, goal):
        plans_file = tmp_path / "plans.jsonl"
        instance = PlanningInstance(TaskKind.PLANNING, goal)
        write_instances(plans_file, [(instance, Plan.from_texts(["a", "b", "c", "d"]))])
        run_dir = tmp_path / "run"
        assert run(["gen-negatives", "--plans", plans_file, "--per-kind", 2,
                    "--target-total", 12, "--run-dir", run_dir]) == 0
        records = read_jsonl(run_dir / "dataset.jsonl")
        assert {r["label"] for r in records} == {"valid", "invalid"}
        manifest = json.loads((run_dir / "dataset.manifest.json").read_text())
        assert manifest["total"] == len(records)


class TestCurateCommand:
    def test_counterfactual_default_threshold(self, tmp_path):
        records_file = tmp_path / "records.jsonl"
        write_curation_records(
            records_file,
            [
                CurationRecord("counterfactual", {"i": 0}, 0.82),
                CurationRecord("counterfactual", {"i": 1}, 0.8199),
                CurationRecord("plan", {"i": 2}, 0.7),
            ],
        )
        run_dir = tmp_path / "run"
        assert run(["curate", "--records", records_file, "--kind", "counterfactual",
                    "--run-dir", run_dir]) == 0
        accepted = read_jsonl(run_dir / "accepted.jsonl")
        rejected = read_jsonl(run_dir / "rejected.jsonl")
        assert [r["payload"]["i"] for r in accepted] == [0]
        assert [r["payload"]["i"] for r in rejected] == [1]

    def test_labeled_records_produce_pr_artifacts(self, tmp_path):
        records_file = tmp_path / "records.jsonl"
        write_curation_records(
            records_file,
            [
                CurationRecord("plan", {"i": 0}, 0.9, label="valid"),
                CurationRecord("plan", {"i": 1}, 0.8, label="invalid"),
                CurationRecord("plan", {"i": 2}, 0.4, label="valid"),
            ],
        )
        run_dir = tmp_path / "run"
        assert run(["curate", "--records", records_file, "--run-dir", run_dir]) == 0
        assert (run_dir / "pr_report.tsv").exists()
        assert (run_dir / "pr_curve.png").exists()


class TestDatagenCommand:
    def test_goals_mode_grows_pool(self, tmp_path, world_file):
        pool_file = tmp_path / "pool.jsonl"
        pool_file.write_text(
            "\n".join(
                json.dumps({"text": t, "provenance": "seed", "round": 0})
                for t in ("goal one", "goal two")
            )
            + "\n"
        )
        run_dir = tmp_path / "run"
        assert run(["datagen", "--mode", "goals", "--completion", f"mock:{world_file}",
                    "--pool", pool_file, "--rounds", 1, "--batch", 2,
                    "--run-dir", run_dir]) == 0
        saved = read_jsonl(run_dir / "goal_pool.jsonl")
        assert len(saved) >= 2

    def test_conditions_mode(self, tmp_path, world_file, goal):
        instances = tmp_path / "instances.jsonl"
        write_instances(
            instances,
            [(PlanningInstance(TaskKind.PLANNING, goal), Plan.from_texts(["s1", "s2"]))],
        )
        run_dir = tmp_path / "run"
        assert run(["datagen", "--mode", "conditions", "--completion", f"mock:{world_file}",
                    "--instances", instances, "--run-dir", run_dir]) == 0
        assert (run_dir / "conditions.jsonl").exists()

    def test_missing_pool_exits_2(self, tmp_path, world_file):
        assert run(["datagen", "--mode", "goals", "--completion", f"mock:{world_file}",
                    "--run-dir", tmp_path / "r"]) == 2


class TestEvalEmbodiedCommand:
    def test_identity_pipeline_through_cli(self, tmp_path):
        from plankit.embodied import ActionVocab, MiniEnv, load_golds

        env = MiniEnv.load(asset("envs/mini_home.json"))
        vocab = ActionVocab.from_env(env)
        golds = load_golds(asset("golds/mini_home_golds.jsonl"))
        plans_file = tmp_path / "plans.jsonl"
        items = []
        for g in golds:
            instance = PlanningInstance(
                TaskKind.PLANNING, Goal(g.get("goal", g["goal_id"]), g["goal_id"])
            )
            plan = Plan.from_texts([vocab.surface_of(a) for a in g["program"]])
            items.append((instance, plan))
        write_instances(plans_file, items)
        run_dir = tmp_path / "run"
        assert run(["eval-embodied", "--plans", plans_file, "--env", asset("envs/mini_home.json"),
                    "--golds", asset("golds/mini_home_golds.jsonl"), "--run-dir", run_dir]) == 0
        aggregate = json.loads((run_dir / "aggregate.json").read_text())
        assert aggregate["executability"] == 1.0
        assert aggregate["mean_lcs"] == 1.0
        assert (run_dir / "scores.png").exists()


class TestBenchCommand:
    def test_oracle_suite_passes(self, tmp_path, capsys):
        assert run(["bench", "--suite", "rescue", "--run-dir", tmp_path / "run"]) == 0
        out = capsys.readouterr().out
        assert "PASS rescue" in out

    def test_results_file_written(self, tmp_path):
        run_dir = tmp_path / "run"
        assert run(["bench", "--suite", "embodied", "--run-dir", run_dir]) == 0
        results = read_jsonl(run_dir / "results.jsonl")
        assert all(r["ok"] for r in results)
