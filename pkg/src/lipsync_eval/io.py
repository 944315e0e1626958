"""Readers and writers for meshes, audio, embeddings, manifests and reports.

Binary containers are little-endian::

    MSH1  magic | u32 T | u32 V | f32 fps | T*V*3 f32 (frame, vertex, xyz)
    EMB1  magic | u32 L | L*u32 layer ids | u32 G | u32 H |
          speech L*G*H f32 | mesh L*G*H f32      (layer, window, dim)

Every writer goes through a temporary file and an atomic rename, so a
failed write never leaves a partial file behind.
"""

from __future__ import annotations

import io
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
from scipy.io import wavfile

from .core import AudioClip, ClipRecord, EmbeddingSet, LandmarkSpec, MeshSequence, MetricReport
from .errors import (
    DataError,
    FormatError,
    IoError,
    LipSyncError,
    MissingAssetError,
    SchemaError,
    TruncationError,
)

MESH_MAGIC = b"MSH1"
EMB_MAGIC = b"EMB1"
_F32 = np.dtype("<f4")


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


class _Cursor:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncationError(
                f"{self.path}: truncated {what} (need {n} bytes at offset {self.pos}, "
                f"file has {len(self.buf)})"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32_array(self, count: int, what: str) -> np.ndarray:
        raw = self.take(count * 4, what)
        arr = np.frombuffer(raw, dtype=_F32).astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{self.path}: non-finite value in {what}")
        return arr

    def finish(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError(f"{self.path}: {len(self.buf) - self.pos} trailing bytes")


def _magic(cur: _Cursor, magic: bytes) -> None:
    got = cur.buf[:4]
    if got != magic:
        if len(got) < 4 and magic.startswith(got):
            raise TruncationError(f"{cur.path}: truncated magic")
        raise FormatError(f"{cur.path}: bad magic {got!r}, expected {magic!r}")
    cur.pos = 4


# -- MSH1 ------------------------------------------------------------------


def mesh_to_bytes(seq: MeshSequence) -> bytes:
    T, V = seq.frames, seq.vertex_count
    header = MESH_MAGIC + struct.pack("<IIf", T, V, seq.fps)
    return header + seq.positions.astype(_F32).tobytes()


def mesh_from_bytes(buf: bytes, path="<bytes>") -> MeshSequence:
    cur = _Cursor(buf, path)
    _magic(cur, MESH_MAGIC)
    T = cur.u32("frame count")
    V = cur.u32("vertex count")
    (fps,) = struct.unpack("<f", cur.take(4, "fps"))
    pos = cur.f32_array(T * V * 3, "vertex payload")
    cur.finish()
    try:
        return MeshSequence(pos.reshape(T, V, 3), float(fps))
    except LipSyncError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def read_mesh(path) -> MeshSequence:
    return mesh_from_bytes(_read_bytes(path), path)


def write_mesh(seq: MeshSequence, path) -> None:
    atomic_write(path, mesh_to_bytes(seq))


# -- EMB1 ------------------------------------------------------------------


def embeddings_to_bytes(emb: EmbeddingSet) -> bytes:
    L = len(emb.layers)
    out = [EMB_MAGIC, struct.pack("<I", L), struct.pack(f"<{L}I", *emb.layers)]
    out.append(struct.pack("<II", emb.windows, emb.dim))
    out.append(emb.speech.astype(_F32).tobytes())
    out.append(emb.mesh.astype(_F32).tobytes())
    return b"".join(out)


def embeddings_from_bytes(buf: bytes, path="<bytes>") -> EmbeddingSet:
    cur = _Cursor(buf, path)
    _magic(cur, EMB_MAGIC)
    L = cur.u32("layer count")
    layers = struct.unpack(f"<{L}I", cur.take(4 * L, "layer ids"))
    G = cur.u32("window count")
    H = cur.u32("dim")
    n = L * G * H
    speech = cur.f32_array(n, "speech block").reshape(L, G, H)
    mesh = cur.f32_array(n, "mesh block").reshape(L, G, H)
    cur.finish()
    try:
        return EmbeddingSet(layers, speech, mesh)
    except LipSyncError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def read_embeddings(path) -> EmbeddingSet:
    return embeddings_from_bytes(_read_bytes(path), path)


def write_embeddings(emb: EmbeddingSet, path) -> None:
    atomic_write(path, embeddings_to_bytes(emb))


# -- WAV -------------------------------------------------------------------


def read_wav(path) -> AudioClip:
    """Read a mono PCM16 or float32 WAV file; PCM16 is scaled by 1/32768."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, struct.error, EOFError) as exc:
        raise FormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim != 1:
        raise FormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(samples, rate)


def write_wav(clip: AudioClip, path) -> None:
    """Write 16-bit PCM; values are rounded to the nearest step of 1/32768."""
    q = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    wavfile.write(buf, clip.sample_rate, q)
    atomic_write(path, buf.getvalue())


# -- manifest --------------------------------------------------------------

_LANDMARK_SCHEMA = {
    "type": "object",
    "required": ["upper_lip_center", "lower_lip_center", "lip_region"],
    "properties": {
        "upper_lip_center": {"type": "integer", "minimum": 0},
        "lower_lip_center": {"type": "integer", "minimum": 0},
        "lip_region": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "left_eye": {"type": "integer", "minimum": 0},
        "right_eye": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["version", "clips"],
    "properties": {
        "version": {"const": 1},
        "default_landmarks": _LANDMARK_SCHEMA,
        "clips": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["clip_id", "identity", "mesh"],
                "properties": {
                    "clip_id": {"type": "string", "minLength": 1},
                    "identity": {"type": "string", "minLength": 1},
                    "intensity_level": {"enum": ["Lv1", "Lv2", "Lv3", "none", None]},
                    "mesh": {"type": "string"},
                    "audio": {"type": "string"},
                    "embeddings": {"type": "string"},
                    "landmarks": _LANDMARK_SCHEMA,
                },
                "additionalProperties": False,
            },
        },
    },
}


@dataclass(frozen=True)
class Manifest:
    version: int = 1
    default_landmarks: Optional[LandmarkSpec] = None
    clips: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "clips", tuple(self.clips))
        if self.version != 1:
            raise SchemaError(f"version: unsupported manifest version {self.version}")
        seen = set()
        for c in self.clips:
            if c.clip_id in seen:
                raise SchemaError(f"clip_id: duplicate {c.clip_id!r}")
            seen.add(c.clip_id)

    def by_id(self) -> dict:
        return {c.clip_id: c for c in self.clips}


def read_manifest(path, check_assets: bool = True) -> Manifest:
    """Parse and validate a manifest; asset paths resolve relative to it."""
    path = Path(path)
    try:
        doc = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(doc, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{path}: {where}: {exc.message}") from None

    base = path.parent
    default = doc.get("default_landmarks")
    default = LandmarkSpec.from_dict(default) if default else None
    records = []
    seen = set()
    for entry in doc["clips"]:
        cid = entry["clip_id"]
        if cid in seen:
            raise SchemaError(f"clip_id: duplicate {cid!r}")
        seen.add(cid)
        lm = entry.get("landmarks")
        lm = LandmarkSpec.from_dict(lm) if lm else default
        if lm is None:
            raise SchemaError(f"{cid}: no landmarks and no default_landmarks")
        resolved = {}
        for key in ("mesh", "audio", "embeddings"):
            if key in entry:
                p = base / entry[key]
                if check_assets and not p.is_file():
                    raise MissingAssetError(cid, str(p))
                resolved[key] = str(p)
        records.append(
            ClipRecord(
                clip_id=cid,
                identity=entry["identity"],
                mesh_path=resolved["mesh"],
                landmarks=lm,
                intensity_level=entry.get("intensity_level"),
                audio_path=resolved.get("audio"),
                embedding_path=resolved.get("embeddings"),
            )
        )
    return Manifest(version=doc["version"], default_landmarks=default, clips=records)


def write_manifest(manifest: Manifest, path) -> None:
    """Write a manifest with asset paths relative to its own directory."""
    base = Path(path).resolve().parent

    def rel(p):
        return os.path.relpath(Path(p).resolve(), base)

    clips = []
    for c in manifest.clips:
        entry = {"clip_id": c.clip_id, "identity": c.identity, "mesh": rel(c.mesh_path)}
        if c.intensity_level:
            entry["intensity_level"] = c.intensity_level
        if c.audio_path:
            entry["audio"] = rel(c.audio_path)
        if c.embedding_path:
            entry["embeddings"] = rel(c.embedding_path)
        if c.landmarks != manifest.default_landmarks:
            entry["landmarks"] = c.landmarks.to_dict()
        clips.append(entry)
    doc = {"version": manifest.version}
    if manifest.default_landmarks is not None:
        doc["default_landmarks"] = manifest.default_landmarks.to_dict()
    doc["clips"] = clips
    atomic_write(path, (json.dumps(doc, indent=2) + "\n").encode())


# -- reports ---------------------------------------------------------------


def format_real(x: float) -> str:
    if not math.isfinite(x):
        raise DataError(f"cannot serialize non-finite value {x!r}")
    return "%.17g" % x


def dumps_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float printed to 17 significant digits and sorted keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_real(float(obj))
    if isinstance(obj, dict) or hasattr(obj, "items"):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k))}: {dumps_json(v, indent, _level + 1)}"
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        ]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{dumps_json(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_to_dict(report: MetricReport) -> dict:
    return {
        "metric": report.metric_name,
        "unit": report.unit,
        "aggregate": report.aggregate,
        "clip_count": report.clip_count,
        "parameters": dict(report.parameters),
        "per_clip": {k: (list(v) if isinstance(v, tuple) else v) for k, v in report.per_clip.items()},
    }


def report_to_csv(report: MetricReport) -> str:
    pairs = any(isinstance(v, tuple) for v in report.per_clip.values())
    lines = ["clip_id,si,li" if pairs else "clip_id,value"]
    for k in sorted(report.per_clip):
        v = report.per_clip[k]
        if isinstance(v, tuple):
            lines.append(",".join([k] + [format_real(x) for x in v]))
        else:
            lines.append(f"{k},{format_real(v)}")
    lines.append(f"AGGREGATE,{format_real(report.aggregate)}")
    return "\n".join(lines) + "\n"


def render_report(report: MetricReport, format: str = "json") -> str:
    if format == "json":
        return dumps_json(report_to_dict(report)) + "\n"
    if format == "csv":
        return report_to_csv(report)
    raise SchemaError(f"format: expected 'json' or 'csv', got {format!r}")


def write_report(report: MetricReport, path, format: str = "json") -> None:
    atomic_write(path, render_report(report, format).encode())


def read_report(path) -> dict:
    try:
        doc = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    missing = {"metric", "aggregate", "per_clip"} - set(doc)
    if missing:
        raise SchemaError(f"{path}: report lacks keys {sorted(missing)}")
    return doc
