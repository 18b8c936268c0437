"""Run manifests: effective configuration plus input and output digests.

Manifests deliberately contain no timestamps so that a rerun with the same
inputs and configuration reproduces every artifact byte for byte; the run
directory name carries the timestamp instead.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

from .jsonl import sha256_file

MANIFEST_NAME = "manifest.json"


def new_run_dir(base: str | Path, command: str) -> Path:
    """Fresh timestamped directory under ``base``; never reuses an existing one."""
    base = Path(base)
    base.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    candidate = base / f"{command}-{stamp}"
    suffix = 0
    while candidate.exists():
        suffix += 1
        candidate = base / f"{command}-{stamp}-{suffix}"
    candidate.mkdir()
    return candidate


def write_manifest(
    run_dir: str | Path, command: str, config: dict, inputs: dict[str, str | Path]
) -> Path:
    """Digest every file in ``run_dir`` and record it with config and inputs."""
    run_dir = Path(run_dir)
    outputs = {}
    for path in sorted(run_dir.rglob("*")):
        if path.is_file() and path.name != MANIFEST_NAME:
            outputs[str(path.relative_to(run_dir))] = sha256_file(path)
    manifest = {
        "command": command,
        "config": config,
        "inputs": {
            name: {"path": str(path), "sha256": sha256_file(path)}
            for name, path in inputs.items()
        },
        "outputs": outputs,
    }
    target = run_dir / MANIFEST_NAME
    with open(target, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return target
