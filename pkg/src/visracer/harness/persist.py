"""Artifact persistence: one checksummed container format plus CSV emitters.

Every binary artifact is MAGIC | version | header-JSON | raw arrays | crc32,
where the header lists the array dtypes/shapes in order. Round trips are
bit-exact. CSV files start with a '# visracer-csv ...' comment carrying the
format version and kind.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import ArtifactMissing, CorruptFile, VersionMismatch
from ..nn import Network
from ..obs import Standardizer
from ..phase1 import ReprNetwork
from ..render import CameraSpec
from ..sac import CriticPair, PolicyNet, SacAgent, SacConfig
from ..nn import Adam

MAGIC = b"VRAF"
FORMAT_VERSION = 1
CSV_VERSION = 1


# ---------------------------------------------------------------- container

def save_artifact(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    header = {
        "kind": kind,
        "meta": meta,
        "arrays": [
            {"name": k, "dtype": v.dtype.str, "shape": list(v.shape)}
            for k, v in arrays.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", FORMAT_VERSION, len(header_bytes))
    blob += header_bytes
    for v in arrays.values():
        blob += np.ascontiguousarray(v).tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_artifact(path, expect_kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    p = Path(path)
    if not p.exists():
        raise ArtifactMissing(f"artifact not found: {p}")
    blob = p.read_bytes()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CorruptFile(f"{p}: not a visracer artifact")
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CorruptFile(f"{p}: checksum mismatch")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{p}: format version {version}, expected {FORMAT_VERSION}")
    header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    if expect_kind is not None and header["kind"] != expect_kind:
        raise CorruptFile(f"{p}: artifact kind {header['kind']!r}, expected {expect_kind!r}")
    arrays = {}
    offset = 12 + header_len
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = dt.itemsize * count
        arrays[spec["name"]] = (
            np.frombuffer(blob[offset : offset + nbytes], dtype=dt)
            .reshape(spec["shape"])
            .copy()
        )
        offset += nbytes
    if offset != len(blob) - 4:
        raise CorruptFile(f"{p}: payload size mismatch")
    return header["meta"], arrays


# ---------------------------------------------------------------- networks

def save_network(path, net: Network, meta: dict | None = None) -> None:
    save_artifact(path, "network", {"manifest": net.manifest(), **(meta or {})},
                  {"params": net.params})


def load_network(path) -> Network:
    meta, arrays = load_artifact(path, "network")
    net = Network.from_manifest(meta["manifest"])
    net.params[:] = arrays["params"]
    return net


# ---------------------------------------------------------------- phase-1 artifact

def save_phase1(path, net: ReprNetwork, extra_meta: dict | None = None) -> None:
    meta = {
        "camera": dataclasses.asdict(net.camera),
        "rep_manifest": net.phi_rep.manifest(),
        "reg_manifest": net.phi_reg.manifest(),
        "history": [[int(e), float(tl), float(ev)] for e, tl, ev in net.history],
        "best_epoch": net.best_epoch,
        **(extra_meta or {}),
    }
    arrays = {
        "rep_params": net.phi_rep.params,
        "reg_params": net.phi_reg.params,
        "std_mean": net.standardizer.mean,
        "std_std": net.standardizer.std,
    }
    save_artifact(path, "phase1", meta, arrays)


def load_phase1(path) -> ReprNetwork:
    meta, arrays = load_artifact(path, "phase1")
    phi_rep = Network.from_manifest(meta["rep_manifest"])
    phi_rep.params[:] = arrays["rep_params"]
    phi_reg = Network.from_manifest(meta["reg_manifest"])
    phi_reg.params[:] = arrays["reg_params"]
    return ReprNetwork(
        phi_rep=phi_rep,
        phi_reg=phi_reg,
        standardizer=Standardizer(mean=arrays["std_mean"], std=arrays["std_std"]),
        camera=CameraSpec(**meta["camera"]),
        history=[tuple(h) for h in meta.get("history", [])],
        best_epoch=meta.get("best_epoch", -1),
    )


# ---------------------------------------------------------------- datasets

def save_dataset(path, ds, extra_meta: dict | None = None) -> None:
    meta = {
        "camera": dataclasses.asdict(ds.camera),
        "track_name": ds.track_name,
        "sample_count": len(ds),
        **(extra_meta or {}),
    }
    save_artifact(path, "dataset", meta,
                  {"frames_u8": ds.frames_u8, "targets": ds.targets, "ticks": ds.ticks})


def load_dataset(path):
    from ..phase1 import RegressionDataset

    meta, arrays = load_artifact(path, "dataset")
    ds = RegressionDataset(
        frames_u8=arrays["frames_u8"],
        targets=arrays["targets"],
        ticks=arrays["ticks"],
        camera=CameraSpec(**meta["camera"]),
        track_name=meta.get("track_name", ""),
    )
    if len(ds) != meta["sample_count"]:
        raise CorruptFile(f"{path}: sample count mismatch")
    return ds


def sample_checksums(ds) -> list[int]:
    """Per-sample crc32 over frame and target bytes."""
    out = []
    for i in range(len(ds)):
        c = zlib.crc32(ds.frames_u8[i].tobytes())
        c = zlib.crc32(ds.targets[i].tobytes(), c)
        out.append(c & 0xFFFFFFFF)
    return out


# ---------------------------------------------------------------- policy checkpoints

def save_policy(path, agent: SacAgent, cfg: SacConfig, meta: dict | None = None) -> None:
    full_meta = {
        "sac_config": dataclasses.asdict(cfg),
        "obs_dim": agent.policy.obs_dim,
        "action_scales": [float(s) for s in agent.policy.scales],
        "actor_manifest": agent.policy.net.manifest(),
        "q_manifest": agent.critics.q1.manifest(),
        "target_entropy": agent.target_entropy,
        **(meta or {}),
    }
    arrays = {
        "actor": agent.policy.net.params,
        "q1": agent.critics.q1.params,
        "q2": agent.critics.q2.params,
        "t1": agent.critics.t1.params,
        "t2": agent.critics.t2.params,
        "log_alpha": agent.log_alpha,
    }
    save_artifact(path, "policy", full_meta, arrays)


def load_policy(path) -> tuple[SacAgent, SacConfig, dict]:
    meta, arrays = load_artifact(path, "policy")
    cfg = SacConfig(**meta["sac_config"])
    obs_dim = int(meta["obs_dim"])
    scales = tuple(meta["action_scales"])
    agent = SacAgent.create(obs_dim, cfg, seed=0, action_scales=scales)
    agent.policy.net.params[:] = arrays["actor"]
    agent.critics.q1.params[:] = arrays["q1"]
    agent.critics.q2.params[:] = arrays["q2"]
    agent.critics.t1.params[:] = arrays["t1"]
    agent.critics.t2.params[:] = arrays["t2"]
    agent.log_alpha[:] = arrays["log_alpha"]
    agent.target_entropy = float(meta["target_entropy"])
    return agent, cfg, meta


# ---------------------------------------------------------------- CSV

def format_float(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def write_csv(path, kind: str, fields: list[str], rows) -> None:
    lines = [f"# visracer-csv format_version={CSV_VERSION} kind={kind}"]
    lines.append(",".join(fields))
    for row in rows:
        lines.append(",".join(
            format_float(v) if isinstance(v, float) else str(v) for v in row
        ))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    if not lines or not lines[0].startswith("# visracer-csv"):
        raise CorruptFile(f"{path}: missing visracer-csv header")
    kind = lines[0].split("kind=", 1)[1]
    fields = lines[1].split(",")
    return kind, fields, [ln.split(",") for ln in lines[2:]]


# ---------------------------------------------------------------- hashing

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:12]
