"""Append-only run manifest: one JSON line per artifact written."""

from __future__ import annotations

import json
import time
from pathlib import Path

from ..errors import ArtifactMissing


class RunManifest:
    def __init__(self, run_dir: Path, config_hash: str, tool_version: str):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / "manifest.jsonl"
        self.config_hash = config_hash
        self.tool_version = tool_version

    def record(self, kind: str, artifact_path) -> None:
        p = Path(artifact_path)
        if not p.exists():
            raise ArtifactMissing(f"refusing to record missing artifact {p}")
        entry = {
            "kind": kind,
            "path": str(p.relative_to(self.run_dir) if p.is_relative_to(self.run_dir) else p),
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "written_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(ln) for ln in self.path.read_text().strip().split("\n") if ln]
