"""Run manifests: reproducibility metadata written next to every output.

Manifests carry the one thing outputs may not: wall-clock information.
Everything else (command, resolved config, input digests, tool version)
is deterministic, so two runs over identical inputs differ only in their
manifests.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__


def sha256_file(path: str | Path, chunk_size: int = 1 << 20) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def build_manifest(
    command: str,
    config: dict,
    inputs: dict[str, str | Path],
    wall_clock_seconds: float,
) -> dict:
    return {
        "command": command,
        "config": config,
        "input_digests": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "tool_version": __version__,
        "wall_clock_seconds": wall_clock_seconds,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def manifest_path_for(output_path: str | Path) -> Path:
    p = Path(output_path)
    return p.with_name(p.name + ".manifest.json")


def write_manifest(output_path: str | Path, manifest: dict) -> Path:
    path = manifest_path_for(output_path)
    with path.open("w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return path
