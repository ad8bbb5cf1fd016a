"""Experiment configuration: JSON schema, validation, run directories.

One JSON file wires every stage together (track, vehicle, camera, baseline,
both training phases, seeds). Unknown keys are rejected so typos fail loudly.
The output root can be overridden with the VISRACER_OUTPUT_ROOT env var.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

from ..baseline import PursuitParams
from ..dynamics import VehicleParams
from ..errors import ConfigInvalid
from ..geometry import TrackSpec
from ..phase1 import Phase1Config
from ..render import CameraSpec
from ..sac import SacConfig
from .. import tracks as tracks_mod
from .persist import config_hash

CONFIG_VERSION = 1

_SECTION_TYPES = {
    "vehicle": VehicleParams,
    "camera": CameraSpec,
    "pursuit": PursuitParams,
    "phase1": Phase1Config,
    "sac": SacConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    track: dict  # {"builtin": name, "params": {...}} or {"file": path} or inline spec
    vehicle: VehicleParams
    camera: CameraSpec
    pursuit: PursuitParams
    phase1: Phase1Config
    sac: SacConfig
    seeds: tuple[int, ...]
    mode: str = "vision"
    output_root: str = "runs"

    def to_dict(self) -> dict:
        return {
            "format_version": CONFIG_VERSION,
            "name": self.name,
            "track": self.track,
            "vehicle": dataclasses.asdict(self.vehicle),
            "camera": dataclasses.asdict(self.camera),
            "pursuit": dataclasses.asdict(self.pursuit),
            "phase1": dataclasses.asdict(self.phase1),
            "sac": dataclasses.asdict(self.sac),
            "seeds": list(self.seeds),
            "mode": self.mode,
            "output_root": self.output_root,
        }

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def resolve_track_spec(self, base_dir: Path | None = None) -> TrackSpec:
        t = self.track
        if "builtin" in t:
            return tracks_mod.builtin_spec(t["builtin"], **t.get("params", {}))
        if "file" in t:
            path = Path(t["file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigInvalid(f"track file not found: {path}")
            return tracks_mod.load_spec(path)
        if "control_points" in t:
            return tracks_mod.spec_from_dict({"format_version": 1, **t})
        raise ConfigInvalid("track must have 'builtin', 'file' or 'control_points'")


def _build_section(name: str, cls, payload: dict):
    if not isinstance(payload, dict):
        raise ConfigInvalid(f"section {name!r} must be an object")
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - fields
    if unknown:
        raise ConfigInvalid(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        obj = cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad section {name!r}: {exc}") from exc
    validate = getattr(obj, "validate", None)
    if validate is not None:
        try:
            validate()
        except ValueError as exc:
            raise ConfigInvalid(f"invalid {name!r}: {exc}") from exc
    return obj


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigInvalid("config must be a JSON object")
    version = d.get("format_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigInvalid(f"unsupported config version {version}")
    known = {"format_version", "name", "track", "seeds", "mode", "output_root",
             *_SECTION_TYPES}
    unknown = set(d) - known
    if unknown:
        raise ConfigInvalid(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("name", "track", "seeds"):
        if key not in d:
            raise ConfigInvalid(f"missing required key {key!r}")
    seeds = d["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigInvalid("seeds must be a non-empty list of ints")
    mode = d.get("mode", "vision")
    if mode not in ("vision", "privileged"):
        raise ConfigInvalid("mode must be 'vision' or 'privileged'")
    sections = {
        name: _build_section(name, cls, d.get(name, {}))
        for name, cls in _SECTION_TYPES.items()
    }
    return ExperimentConfig(
        name=str(d["name"]),
        track=d["track"],
        seeds=tuple(seeds),
        mode=mode,
        output_root=str(d.get("output_root", "runs")),
        **sections,
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigInvalid(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{p}: invalid JSON ({exc})") from exc
    cfg = config_from_dict(data)
    # radians sanity for camera angles supplied in config files
    if not 0.0 < cfg.camera.horizontal_fov < math.pi:
        raise ConfigInvalid("camera.horizontal_fov must be in (0, pi) radians")
    return cfg


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")


def output_root(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get("VISRACER_OUTPUT_ROOT", cfg.output_root))


def make_run_dir(cfg: ExperimentConfig, command: str) -> Path:
    """Timestamp/hash-scoped run directory; never overwrites a prior run."""
    root = output_root(cfg)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = f"{cfg.name}-{command}-{cfg.hash}-{stamp}"
    run_dir = root / base
    k = 1
    while run_dir.exists():
        run_dir = root / f"{base}-{k}"
        k += 1
    run_dir.mkdir(parents=True)
    return run_dir


def bundled_config_path(name: str) -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "configs" / f"{name}.json"
