"""On-disk formats: trajectory directories, session logs, reports, programs.

A trajectory directory holds ``frame_000000.png`` ... plus ``manifest.json``
(format ``v1``). Frames are lossless 8-bit RGB PNGs; every file is listed
with its SHA-256 so a loaded corpus is exactly the one that was verified.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from filelock import FileLock
from PIL import Image

from .artifacts import GeneratedArtifacts
from .gridworld.envs import Trajectory
from .gridworld.grid import Action
from .imaging import Frame
from .rewardlang import Kind, Program, format_program, parse

MANIFEST_FORMAT = "v1"
MANIFEST = "manifest.json"
LOCK = ".write.lock"


class DatastoreError(Exception):
    pass


class IntegrityError(DatastoreError):
    pass


class SchemaError(DatastoreError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class IoError(DatastoreError):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _png_bytes(frame: Frame) -> bytes:
    import io
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(frame.pixels), "RGB").save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def _encode_action(a) -> Any:
    if isinstance(a, (int, np.integer)):
        return int(a)
    return [float(v) for v in a]


def _decode_action(v, env_id: str):
    if isinstance(v, int):
        return v if env_id.lower() == "blockpush" else Action(v)
    return tuple(float(x) for x in v)


def content_hash(traj: Trajectory) -> str:
    """Hash over pixels, actions, rewards and provenance (encoder-independent)."""
    h = hashlib.sha256()
    head = {"env_id": traj.env_id, "spec_hash": traj.spec_hash, "label": traj.label, "seed": traj.seed,
            "actions": [_encode_action(a) for a in traj.actions], "rewards": list(map(float, traj.rewards))}
    h.update(json.dumps(head, sort_keys=True).encode())
    for f in traj.frames:
        h.update(f.digest.encode())
    return h.hexdigest()


def save_trajectory(traj: Trajectory, directory: str | Path) -> dict:
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        with FileLock(str(d / LOCK)):
            frames = []
            for i, f in enumerate(traj.frames):
                name = f"frame_{i:06d}.png"
                data = _png_bytes(f)
                (d / name).write_bytes(data)  # the manifest, written last, commits the set
                frames.append({"file": name, "sha256": _sha256(data), "pixels": f.digest})
            manifest = {
                "format": MANIFEST_FORMAT,
                "env_id": traj.env_id,
                "spec_hash": traj.spec_hash,
                "policy": traj.label,
                "seed": traj.seed,
                "frame_count": len(traj.frames),
                "actions": [_encode_action(a) for a in traj.actions],
                "rewards": [float(r) for r in traj.rewards],
                "frames": frames,
                "content_hash": content_hash(traj),
            }
            _atomic_write(d / MANIFEST, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    except OSError as e:
        raise IoError(f"cannot write trajectory to {d}: {e}") from e
    return manifest


_MANIFEST_FIELDS = {
    "format": str, "env_id": str, "spec_hash": str, "policy": str, "seed": int,
    "frame_count": int, "actions": list, "rewards": list, "frames": list, "content_hash": str,
}


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text("utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path.name}: {e.msg}", e.lineno) from None


def load_trajectory(directory: str | Path) -> Trajectory:
    d = Path(directory)
    m = _read_json(d / MANIFEST)
    if not isinstance(m, dict):
        raise SchemaError("manifest must be a JSON object")
    for key, typ in _MANIFEST_FIELDS.items():
        if key not in m:
            raise SchemaError(f"manifest missing {key!r}")
        if not isinstance(m[key], typ) or (typ is int and isinstance(m[key], bool)):
            raise SchemaError(f"manifest field {key!r} must be {typ.__name__}")
    if m["format"] != MANIFEST_FORMAT:
        raise SchemaError(f"unsupported manifest format {m['format']!r}")
    n = m["frame_count"]
    if not (n == len(m["frames"]) == len(m["actions"]) + 1 == len(m["rewards"]) + 1):
        raise IntegrityError(
            f"count mismatch: frame_count={n}, frames={len(m['frames'])}, "
            f"actions={len(m['actions'])}, rewards={len(m['rewards'])}")
    frames = []
    for i, entry in enumerate(m["frames"]):
        if not isinstance(entry, dict) or not {"file", "sha256", "pixels"} <= entry.keys():
            raise SchemaError(f"frame entry {i} malformed")
        path = d / entry["file"]
        if path.parent != d:
            raise IntegrityError(f"frame path {entry['file']!r} escapes the trajectory directory")
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise IntegrityError(f"missing frame file {entry['file']}") from None
        except OSError as e:
            raise IoError(f"cannot read {path}: {e}") from e
        if _sha256(data) != entry["sha256"]:
            raise IntegrityError(f"hash mismatch for {entry['file']}")
        with Image.open(io.BytesIO(data)) as im:
            if im.mode != "RGB":
                raise IntegrityError(f"{entry['file']} is {im.mode}, expected 8-bit RGB")
            frame = Frame(np.asarray(im, dtype=np.uint8))
        if frame.digest != entry["pixels"]:
            raise IntegrityError(f"pixel digest mismatch for {entry['file']}")
        frames.append(frame)
    actions = [_decode_action(a, m["env_id"]) for a in m["actions"]]
    traj = Trajectory(frames, actions, [float(r) for r in m["rewards"]], m["policy"], m["env_id"],
                      m["seed"], m["spec_hash"])
    if content_hash(traj) != m["content_hash"]:
        raise IntegrityError("content hash mismatch")
    return traj


def save_corpus(trajs: Iterable[Trajectory], root: str | Path) -> list[Path]:
    out = []
    for tr in trajs:
        d = Path(root) / f"{tr.label}_{tr.seed:06d}"
        save_trajectory(tr, d)
        out.append(d)
    return out


def load_corpus(root: str | Path) -> list[Trajectory]:
    r = Path(root)
    if not r.is_dir():
        raise IoError(f"corpus directory {r} does not exist")
    dirs = sorted(p for p in r.iterdir() if (p / MANIFEST).is_file())
    return [load_trajectory(p) for p in dirs]


# -- sessions ----------------------------------------------------------------

SESSION_FIELDS = {"role": str, "text": str, "image_hashes": list, "timestamp": (int, float, str)}


def validate_session_record(rec: Any, line: int | None = None) -> dict:
    if not isinstance(rec, dict):
        raise SchemaError("session record must be an object", line)
    for key, typ in SESSION_FIELDS.items():
        if key not in rec:
            raise SchemaError(f"missing field {key!r}", line)
        if not isinstance(rec[key], typ):
            raise SchemaError(f"field {key!r} has the wrong type", line)
    if rec["role"] not in ("system", "user", "assistant"):
        raise SchemaError(f"unknown role {rec['role']!r}", line)
    if rec["role"] == "assistant" and rec["image_hashes"]:
        raise SchemaError("assistant messages carry no images", line)
    return rec


def save_session(records: Iterable[dict], path: str | Path) -> None:
    lines = []
    for i, rec in enumerate(records, start=1):
        validate_session_record(rec, i)
        lines.append(json.dumps(rec, sort_keys=True, ensure_ascii=False))
    try:
        _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))
    except OSError as e:
        raise IoError(f"cannot write session {path}: {e}") from e


def load_session(path: str | Path) -> list[dict]:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as e:
        raise IoError(f"cannot read session {path}: {e}") from e
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"malformed JSON: {e.msg}", i) from None
        out.append(validate_session_record(rec, i))
    return out


# -- reports and programs -------------------------------------------------------

def save_json(obj: dict, path: str | Path) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    try:
        _atomic_write(Path(path), text.encode("utf-8"))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return _sha256(text.encode("utf-8"))


def save_report(report, path: str | Path) -> str:
    """Write a verification or separation report; returns the file's SHA-256."""
    return save_json(report.to_dict(), path)


def load_report(path: str | Path) -> dict:
    d = _read_json(Path(path))
    if not isinstance(d, dict) or "format" not in d or "passed" not in d:
        raise SchemaError("report must be an object with 'format' and 'passed'")
    return d


def save_program(program: Program, path: str | Path) -> str:
    text = format_program(program)
    try:
        _atomic_write(Path(path), text.encode("utf-8"))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return _sha256(text.encode("utf-8"))


def load_program(path: str | Path, kind: Kind | str | None = None) -> Program:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    return parse(text, kind)


# -- generated artifacts ------------------------------------------------------------

ARTIFACTS = "artifacts.json"


def save_artifacts(art: GeneratedArtifacts, directory: str | Path) -> dict:
    d = Path(directory)
    files: dict[str, Any] = {"checkers": [], "identifiers": {}, "goal": None, "reward": None}
    for i, p in enumerate(art.checkers, start=1):
        name = f"check_{i:02d}.rwd"
        save_program(p, d / name)
        files["checkers"].append(name)
    for obj, p in sorted(art.identifiers.items()):
        name = f"identify_{obj}.rwd"
        save_program(p, d / name)
        files["identifiers"][obj] = name
    if art.goal is not None:
        files["goal"] = "goal.rwd"
        save_program(art.goal, d / "goal.rwd")
    if art.reward is not None:
        files["reward"] = "reward.rwd"
        save_program(art.reward, d / "reward.rwd")
    meta = {
        "format": "artifacts/v1",
        "env_id": art.env_id,
        "task": art.task,
        "subtasks": art.subtasks,
        "subtask_objects": art.subtask_objects,
        "goal_is_last_task": art.goal_is_last_task,
        "failures": art.failures,
        "session_log": art.session_log,
        "files": files,
    }
    save_json(meta, d / ARTIFACTS)
    return meta


def load_artifacts(directory: str | Path) -> GeneratedArtifacts:
    d = Path(directory)
    meta = _read_json(d / ARTIFACTS)
    if not isinstance(meta, dict) or meta.get("format") != "artifacts/v1":
        raise SchemaError("not an artifacts/v1 document")
    try:
        files = meta["files"]
        checkers = [load_program(d / f, Kind.CHECK) for f in files["checkers"]]
        idents = {k: load_program(d / f, Kind.IDENTIFY) for k, f in files["identifiers"].items()}
        goal = load_program(d / files["goal"]) if files["goal"] else None
        reward = load_program(d / files["reward"], Kind.REWARD) if files["reward"] else None
        return GeneratedArtifacts(
            meta["env_id"], meta["task"], list(meta["subtasks"]), checkers, goal, reward, idents,
            [list(x) for x in meta["subtask_objects"]], bool(meta["goal_is_last_task"]),
            dict(meta["failures"]), meta["session_log"])
    except (KeyError, TypeError) as e:
        raise SchemaError(f"artifacts document malformed: {e}") from None


class StoredReport:
    """A verification report read back from disk; digests match the original."""

    def __init__(self, data: dict):
        self.data = data

    @property
    def passed(self) -> bool:
        return bool(self.data.get("passed"))

    def digest(self) -> str:
        return _sha256(json.dumps(self.data, indent=2, sort_keys=True).encode())

    def to_dict(self) -> dict:
        return self.data
