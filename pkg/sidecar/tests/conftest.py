import json
import random
import shutil
import subprocess
import sys

import pytest

from plansidecar.config import SidecarConfig
from plansidecar.server import SidecarServer

PLANKIT = shutil.which("plankit")


@pytest.fixture(scope="session")
def server():
    with SidecarServer(SidecarConfig(student="builtin:3", verifier="builtin:3")) as srv:
        yield srv


@pytest.fixture(scope="session")
def deterministic_server():
    with SidecarServer(
        SidecarConfig(student="builtin:3", verifier="builtin:3", deterministic=True)
    ) as srv:
        yield srv


def synthetic_plan_records(n: int, seed: int) -> list[dict]:
    """Instance records with plans, in the engine's documented file format."""
    rng = random.Random(seed)
    records = []
    for i in range(n):
        length = rng.randint(3, 9)
        steps = [f"do chore {i % 40} part {t} v{rng.randrange(50)}" for t in range(1, length + 1)]
        records.append(
            {"id": f"sp{i:05d}", "kind": "planning", "goal": f"finish chore {i % 40}", "plan": steps}
        )
    return records


@pytest.fixture(scope="session")
def pair_dataset(tmp_path_factory):
    """Verifier pair records produced by the engine CLI from synthetic plans."""
    if PLANKIT is None:
        pytest.skip("plankit CLI not installed; cannot build the pair dataset")
    base = tmp_path_factory.mktemp("pairs")
    plans_file = base / "plans.jsonl"
    with open(plans_file, "w", encoding="utf-8") as handle:
        for record in synthetic_plan_records(600, seed=5):
            handle.write(json.dumps(record) + "\n")
    run_dir = base / "run"
    subprocess.run(
        [PLANKIT, "gen-negatives", "--plans", str(plans_file), "--per-kind", "2",
         "--seed", "11", "--target-total", "9000", "--run-dir", str(run_dir)],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    return run_dir / "dataset.jsonl"
