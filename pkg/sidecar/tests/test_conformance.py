"""Protocol conformance: schema shape, value ranges, determinism, and the
engine decoding end to end against this server."""

import json
import shutil
import subprocess

import pytest
import requests

from conftest import PLANKIT


def post(server, path, payload, expect=200):
    response = requests.post(f"{server.address}{path}", json=payload, timeout=30)
    assert response.status_code == expect, response.text
    return response.json()


def propose_payload(**overrides):
    payload = {
        "task": "planning",
        "goal": "make a cup of tea",
        "prefix_steps": ["fill the kettle with water"],
        "n": 4,
        "method": {"kind": "nucleus", "top_p": 0.9, "temperature": 1.0, "seed": 7},
    }
    payload.update(overrides)
    return payload


class TestProposeSchema:
    def test_response_shape(self, server):
        body = post(server, "/v1/propose", propose_payload())
        assert set(body) == {"candidates"}
        assert 1 <= len(body["candidates"]) <= 4
        for candidate in body["candidates"]:
            assert set(candidate) == {"text", "logprob_sum", "token_count", "terminal"}
            assert isinstance(candidate["text"], str)
            assert isinstance(candidate["terminal"], bool)
            assert candidate["logprob_sum"] <= 0.0
            assert candidate["token_count"] >= 1
            if not candidate["terminal"]:
                assert candidate["text"].strip()

    def test_greedy_and_beam_kinds(self, server):
        for kind in ("greedy", "beam"):
            method = {"kind": kind, "seed": 0}
            if kind == "beam":
                method["beam_width"] = 4
            body = post(server, "/v1/propose", propose_payload(method=method))
            assert len(body["candidates"]) <= 4

    def test_candidates_unique(self, server):
        body = post(server, "/v1/propose", propose_payload(n=8))
        texts = [c["text"] for c in body["candidates"]]
        assert len(texts) == len(set(texts))

    def test_condition_and_initial_plan_accepted(self, server):
        body = post(
            server,
            "/v1/propose",
            propose_payload(
                task="counterfactual-revision",
                condition="the kettle is broken",
                initial_plan=["fill the kettle with water", "boil it"],
            ),
        )
        assert body["candidates"]

    def test_missing_field_is_400(self, server):
        payload = propose_payload()
        del payload["prefix_steps"]
        body = post(server, "/v1/propose", payload, expect=400)
        assert "prefix_steps" in body["error"]
        # Server still answers afterwards.
        assert post(server, "/v1/propose", propose_payload())["candidates"]

    def test_bad_method_kind_is_400(self, server):
        body = post(
            server, "/v1/propose", propose_payload(method={"kind": "magic", "seed": 0}),
            expect=400,
        )
        assert "magic" in body["error"]


class TestLoglikSchema:
    def test_shape_and_additivity(self, server):
        base = {"task": "planning", "goal": "make a cup of tea"}
        one = post(server, "/v1/loglik", dict(base, steps=["fill the kettle with water"]))
        two = post(
            server,
            "/v1/loglik",
            dict(base, steps=["fill the kettle with water", "boil the water"]),
        )
        assert set(one) == {"logprob_sum", "token_count"}
        assert one["logprob_sum"] <= 0.0
        assert two["token_count"] > one["token_count"]
        assert two["logprob_sum"] < one["logprob_sum"]

    def test_empty_steps(self, server):
        body = post(server, "/v1/loglik", {"task": "planning", "goal": "g", "steps": []})
        assert body == {"logprob_sum": 0.0, "token_count": 0}

    def test_propose_matches_loglik_delta(self, server):
        base = {"task": "planning", "goal": "water the plant"}
        prefix = ["find the watering can"]
        body = post(
            server,
            "/v1/propose",
            propose_payload(goal=base["goal"], prefix_steps=prefix,
                            method={"kind": "greedy", "seed": 0}),
        )
        candidate = next(c for c in body["candidates"] if not c["terminal"])
        before = post(server, "/v1/loglik", dict(base, steps=prefix))
        after = post(server, "/v1/loglik", dict(base, steps=prefix + [candidate["text"]]))
        delta = after["logprob_sum"] - before["logprob_sum"]
        assert delta == pytest.approx(candidate["logprob_sum"], abs=1e-6)
        assert after["token_count"] - before["token_count"] == candidate["token_count"]


class TestVerifyRange:
    def test_validity_always_in_unit_interval(self, server):
        for i in range(25):
            body = post(
                server,
                "/v1/verify",
                {
                    "goal": f"goal number {i}",
                    "prefix_steps": [f"step {j}" for j in range(i % 4)],
                    "candidate_step": f"candidate {i} with words {i * 7}",
                },
            )
            assert set(body) == {"validity"}
            assert 0.0 <= body["validity"] <= 1.0


class TestCompleteSchema:
    def test_shape(self, server):
        body = post(
            server,
            "/v1/complete",
            {"prompt": "Goal: tidy up", "max_tokens": 40, "top_p": 0.9,
             "temperature": 1.0, "seed": 3},
        )
        assert set(body) == {"text"}
        assert isinstance(body["text"], str)


class TestDeterminism:
    def test_temperature_zero_propose_identical(self, deterministic_server):
        payload = propose_payload()
        first = post(deterministic_server, "/v1/propose", payload)
        second = post(deterministic_server, "/v1/propose", payload)
        assert first == second

    def test_seeded_nucleus_identical(self, server):
        payload = propose_payload(n=6)
        assert post(server, "/v1/propose", payload) == post(server, "/v1/propose", payload)

    def test_greedy_identical_without_flag(self, server):
        payload = propose_payload(method={"kind": "greedy", "seed": 0})
        assert post(server, "/v1/propose", payload) == post(server, "/v1/propose", payload)

    def test_complete_deterministic(self, deterministic_server):
        payload = {"prompt": "Goal: fold laundry", "max_tokens": 30, "top_p": 0.9,
                   "temperature": 1.0, "seed": 5}
        assert post(deterministic_server, "/v1/complete", payload) == post(
            deterministic_server, "/v1/complete", payload
        )


@pytest.mark.skipif(PLANKIT is None, reason="plankit CLI not installed")
class TestEngineIntegration:
    def test_engine_decodes_against_sidecar(self, server, tmp_path):
        instances = tmp_path / "instances.jsonl"
        instances.write_text(
            json.dumps({"id": "t1", "kind": "planning", "goal": "make a cup of tea"}) + "\n",
            encoding="utf-8",
        )
        run_dir = tmp_path / "run"
        result = subprocess.run(
            [PLANKIT, "decode", "--scorer", server.address, "--instances", str(instances),
             "--alpha", "0.75", "--k", "3", "--n", "4", "--max-steps", "6",
             "--method-mix",
             '[{"kind":"beam","beam_width":2,"count":2},'
             '{"kind":"nucleus","top_p":0.9,"temperature":1.0,"count":2}]',
             "--candidates-n", "4", "--run-dir", str(run_dir)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        plans = [
            json.loads(line)
            for line in (run_dir / "plans.jsonl").read_text("utf-8").splitlines()
            if line
        ]
        assert len(plans) == 1
        assert plans[0]["id"] == "t1"
        assert isinstance(plans[0]["plan"], list)

    def test_engine_decode_reproducible_over_sidecar(self, server, tmp_path):
        instances = tmp_path / "instances.jsonl"
        instances.write_text(
            json.dumps({"id": "t1", "kind": "planning", "goal": "water the plant"}) + "\n",
            encoding="utf-8",
        )
        outputs = []
        for name in ("a", "b"):
            run_dir = tmp_path / name
            result = subprocess.run(
                [PLANKIT, "decode", "--scorer", server.address, "--instances", str(instances),
                 "--seed", "21", "--max-steps", "6", "--run-dir", str(run_dir)],
                capture_output=True,
                text=True,
            )
            assert result.returncode == 0, result.stderr
            outputs.append((run_dir / "plans.jsonl").read_bytes())
        assert outputs[0] == outputs[1]
