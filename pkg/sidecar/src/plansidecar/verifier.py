"""Step verifier: a small classifier over (goal, plan-so-far, candidate) text.

Features are hashed bags of words for the goal, the last prefix step, and
the candidate, plus hashed token pairs between the last step and the
candidate and a handful of overlap scalars. A two-layer network maps them
to a validity probability in [0, 1]. Training reads the documented verifier
pair record format ({goal, prefix, candidate, label, ...}, one JSON per
line) and early-stops on validation accuracy.
"""

from __future__ import annotations

import hashlib
import io
import json
import random
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .artifacts import read_manifest, write_artifact
from .config import VerifierTrainConfig
from .vocab import tokenize

_SCALAR_SLOTS = 8


def _bucket(feature: str, dim: int) -> int:
    digest = hashlib.blake2s(feature.encode("utf-8"), digest_size=8).digest()
    return _SCALAR_SLOTS + int.from_bytes(digest, "big") % (dim - _SCALAR_SLOTS)


def featurize(goal: str, prefix: list[str], candidate: str, dim: int) -> np.ndarray:
    vector = np.zeros(dim, dtype=np.float32)
    goal_tokens = tokenize(goal)
    candidate_tokens = tokenize(candidate)
    last_tokens = tokenize(prefix[-1]) if prefix else []
    prefix_tokens = {token for step in prefix for token in tokenize(step)}
    for token in goal_tokens:
        vector[_bucket("g|" + token, dim)] += 1.0
    for token in candidate_tokens:
        vector[_bucket("c|" + token, dim)] += 1.0
    for token in last_tokens:
        vector[_bucket("l|" + token, dim)] += 1.0
    for a in last_tokens:
        for b in candidate_tokens:
            vector[_bucket(f"x|{a}|{b}", dim)] += 1.0
    if candidate_tokens:
        overlap_last = len(set(candidate_tokens) & set(last_tokens)) / len(set(candidate_tokens))
        overlap_prefix = len(set(candidate_tokens) & prefix_tokens) / len(set(candidate_tokens))
    else:
        overlap_last = overlap_prefix = 0.0
    vector[0] = overlap_last
    vector[1] = overlap_prefix
    vector[2] = 1.0 if prefix and candidate == prefix[-1] else 0.0
    vector[3] = 1.0 if candidate in prefix else 0.0
    vector[4] = min(len(prefix), 12) / 12.0
    vector[5] = min(len(candidate_tokens), 12) / 12.0
    vector[6] = 1.0 if not prefix else 0.0
    vector[7] = 1.0
    return vector


class VerifierNet(nn.Module):
    def __init__(self, feature_dim: int, hidden_dim: int):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(feature_dim, hidden_dim), nn.ReLU(), nn.Linear(hidden_dim, 2)
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.layers(features)


class VerifierModel:
    def __init__(self, net: VerifierNet, feature_dim: int):
        self.net = net.eval()
        self.feature_dim = feature_dim

    @classmethod
    def builtin(cls, seed: int = 0, feature_dim: int = 2048, hidden_dim: int = 64) -> "VerifierModel":
        generator = torch.Generator().manual_seed(seed)
        net = VerifierNet(feature_dim, hidden_dim)
        with torch.no_grad():
            for parameter in net.parameters():
                parameter.copy_(torch.empty_like(parameter).normal_(0, 0.1, generator=generator))
        return cls(net, feature_dim)

    @classmethod
    def load(cls, directory: str | Path) -> "VerifierModel":
        manifest = read_manifest(directory)
        if manifest["kind"] != "verifier":
            raise ValueError(f"artifact at {directory} is not a verifier model")
        meta = manifest["meta"]
        net = VerifierNet(meta["feature_dim"], meta["hidden_dim"])
        state = torch.load(Path(directory) / "weights.pt", map_location="cpu", weights_only=True)
        net.load_state_dict(state)
        return cls(net, meta["feature_dim"])

    def save(self, directory: str | Path, meta: dict) -> Path:
        buffer = io.BytesIO()
        torch.save(self.net.state_dict(), buffer)
        return write_artifact(directory, "verifier", {"weights.pt": buffer.getvalue()}, meta)

    @torch.no_grad()
    def validity(self, goal: str, prefix: list[str], candidate: str) -> float:
        features = torch.from_numpy(
            featurize(goal, prefix, candidate, self.feature_dim)
        ).unsqueeze(0)
        probability = torch.softmax(self.net(features), dim=-1)[0, 1]
        return float(min(max(probability.item(), 0.0), 1.0))


def load_pair_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            for field in ("goal", "prefix", "candidate", "label"):
                if field not in record:
                    raise ValueError(f"line {lineno} is missing {field!r}")
            records.append(record)
    return records


def train_verifier(
    dataset_path: str | Path,
    out_dir: str | Path,
    config: VerifierTrainConfig = VerifierTrainConfig(),
) -> tuple[Path, dict]:
    """Train on a verifier pair dataset; returns (artifact dir, metrics).

    The held-out split, batching, and initialization are all seeded. Early
    stopping tracks validation accuracy with the configured patience; the
    best weights are restored before saving.
    """
    records = load_pair_records(dataset_path)
    labels = sorted({record["label"] for record in records})
    if len(labels) < 2:
        raise ValueError(f"dataset must contain both labels, found {labels}")

    rng = random.Random(config.seed)
    order = list(range(len(records)))
    rng.shuffle(order)
    n_val = max(1, int(len(records) * config.validation_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]

    def tensors(indices: list[int]) -> tuple[torch.Tensor, torch.Tensor]:
        features = np.stack(
            [
                featurize(
                    records[i]["goal"],
                    list(records[i]["prefix"]),
                    records[i]["candidate"],
                    config.feature_dim,
                )
                for i in indices
            ]
        )
        targets = np.array(
            [1 if records[i]["label"] == "valid" else 0 for i in indices], dtype=np.int64
        )
        return torch.from_numpy(features), torch.from_numpy(targets)

    train_x, train_y = tensors(train_idx)
    val_x, val_y = tensors(val_idx)
    majority = float(max(val_y.float().mean().item(), 1 - val_y.float().mean().item()))

    torch.manual_seed(config.seed)
    net = VerifierNet(config.feature_dim, config.hidden_dim)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    def val_accuracy() -> float:
        net.eval()
        with torch.no_grad():
            predictions = net(val_x).argmax(dim=-1)
        return float((predictions == val_y).float().mean().item())

    best_accuracy = -1.0
    best_state = None
    stale = 0
    epochs_ran = 0
    shuffle_rng = torch.Generator().manual_seed(config.seed + 1)
    for epoch in range(config.epochs):
        epochs_ran = epoch + 1
        net.train()
        permutation = torch.randperm(len(train_idx), generator=shuffle_rng)
        for start in range(0, len(train_idx), config.batch_size):
            batch = permutation[start : start + config.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(net(train_x[batch]), train_y[batch])
            loss.backward()
            optimizer.step()
        accuracy = val_accuracy()
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best_state = {k: v.clone() for k, v in net.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale > config.early_stopping_patience:
                break
    if best_state is not None:
        net.load_state_dict(best_state)

    metrics = {
        "examples": len(records),
        "train_size": len(train_idx),
        "val_size": len(val_idx),
        "val_accuracy": best_accuracy,
        "majority_baseline": majority,
        "beats_majority": best_accuracy > majority,
        "epochs_ran": epochs_ran,
        "seed": config.seed,
    }
    meta = {
        "feature_dim": config.feature_dim,
        "hidden_dim": config.hidden_dim,
        "metrics": metrics,
    }
    artifact_dir = VerifierModel(net, config.feature_dim).save(out_dir, meta)
    return artifact_dir, metrics
