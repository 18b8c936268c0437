"""Versioned model artifact directories with a manifest."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

LAYOUT_VERSION = 1


def write_artifact(directory: str | Path, kind: str, files: dict[str, bytes], meta: dict) -> Path:
    """Write artifact files plus manifest.json; returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, blob in files.items():
        path = directory / name
        path.write_bytes(blob)
        digests[name] = hashlib.sha256(blob).hexdigest()
    manifest = {
        "layout_version": LAYOUT_VERSION,
        "kind": kind,
        "meta": meta,
        "files": digests,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return directory


def read_manifest(directory: str | Path) -> dict:
    path = Path(directory) / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("layout_version") != LAYOUT_VERSION:
        raise ValueError(f"unsupported artifact layout {manifest.get('layout_version')!r}")
    return manifest
