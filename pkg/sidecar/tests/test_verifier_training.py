"""Verifier training: beats the majority baseline, rejects single-label
data, reproduces under a seed, and round-trips through serving."""

import json

import pytest
import requests

from plansidecar.config import SidecarConfig, VerifierTrainConfig
from plansidecar.server import SidecarServer
from plansidecar.verifier import VerifierModel, train_verifier

TRAIN = VerifierTrainConfig(epochs=10, batch_size=32, learning_rate=1e-2, seed=13)


@pytest.fixture(scope="module")
def trained(pair_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("verifier") / "v1"
    return train_verifier(pair_dataset, out, TRAIN)


class TestTraining:
    def test_beats_majority_baseline(self, trained):
        _, metrics = trained
        assert metrics["val_accuracy"] > metrics["majority_baseline"]
        assert metrics["beats_majority"] is True

    def test_metrics_report_sizes(self, trained):
        _, metrics = trained
        assert metrics["examples"] == metrics["train_size"] + metrics["val_size"]
        assert 1 <= metrics["epochs_ran"] <= TRAIN.epochs

    def test_single_label_dataset_rejected(self, tmp_path):
        dataset = tmp_path / "single.jsonl"
        with open(dataset, "w", encoding="utf-8") as handle:
            for i in range(10):
                handle.write(
                    json.dumps(
                        {"goal": "g", "prefix": ["a"], "candidate": f"b{i}", "label": "valid"}
                    )
                    + "\n"
                )
        with pytest.raises(ValueError, match="both labels"):
            train_verifier(dataset, tmp_path / "out", TRAIN)

    def test_seed_reproducibility(self, pair_dataset, tmp_path):
        _, first = train_verifier(pair_dataset, tmp_path / "a", TRAIN)
        _, second = train_verifier(pair_dataset, tmp_path / "b", TRAIN)
        assert first["val_accuracy"] == second["val_accuracy"]
        assert first["epochs_ran"] == second["epochs_ran"]

    def test_artifact_round_trip(self, trained):
        directory, _ = trained
        model = VerifierModel.load(directory)
        score = model.validity("finish chore 3", ["do chore 3 part 1 v2"], "do chore 3 part 2 v9")
        assert 0.0 <= score <= 1.0

    def test_repeat_scores_below_continuation(self, trained):
        """The trained model should prefer a fresh continuation over an
        immediate repeat of the previous step."""
        directory, _ = trained
        model = VerifierModel.load(directory)
        goal = "finish chore 7"
        prefix = ["do chore 7 part 1 v4", "do chore 7 part 2 v11"]
        repeat = model.validity(goal, prefix, prefix[-1])
        continuation = model.validity(goal, prefix, "do chore 7 part 3 v30")
        assert continuation > repeat


class TestServingTrainedVerifier:
    def test_server_uses_trained_artifact(self, trained):
        directory, _ = trained
        config = SidecarConfig(student="builtin:3", verifier=str(directory))
        with SidecarServer(config) as server:
            response = requests.post(
                f"{server.address}/v1/verify",
                json={
                    "goal": "finish chore 7",
                    "prefix_steps": ["do chore 7 part 1 v4"],
                    "candidate_step": "do chore 7 part 1 v4",
                },
                timeout=30,
            )
            assert response.status_code == 200
            assert 0.0 <= response.json()["validity"] <= 1.0
