"""Domain types shared across the package.

All types are frozen dataclasses. Array fields are copied on construction,
promoted to float64 and marked read-only, so instances behave as values.
Use :func:`dataclasses.replace` to derive a modified copy.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Optional

import numpy as np

from .errors import ConfigError, DataError, LandmarkError, LengthError, SchemaError

INTENSITY_LEVELS = ("Lv1", "Lv2", "Lv3")


def _frozen(values, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise LengthError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name}: contains non-finite values")
    arr.setflags(write=False)
    return arr


class _ArrayEq:
    """Value equality for dataclasses holding numpy arrays."""

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MeshSequence(_ArrayEq):
    """Vertex positions over time, shape ``(frames, vertex_count, 3)``."""

    positions: np.ndarray
    fps: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64, copy=True)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise LengthError(f"positions: expected shape (T, V, 3), got {pos.shape}")
        if pos.shape[0] < 1:
            raise LengthError("frames: need at least one frame")
        if pos.shape[1] < 1:
            raise LengthError("vertex_count: need at least one vertex")
        if not np.all(np.isfinite(pos)):
            raise DataError("positions: contains non-finite values")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        fps = float(self.fps)
        if not np.isfinite(fps) or fps <= 0:
            raise ConfigError(f"fps: must be positive, got {self.fps!r}")
        object.__setattr__(self, "fps", fps)

    @property
    def frames(self) -> int:
        return self.positions.shape[0]

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True, eq=False)
class AudioClip(_ArrayEq):
    """Mono samples normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = _frozen(self.samples, "samples", 1)
        if s.size < 1:
            raise LengthError("samples: need at least one sample")
        object.__setattr__(self, "samples", s)
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ConfigError(f"sample_rate: must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class LandmarkSpec:
    upper_lip_center: int
    lower_lip_center: int
    lip_region: tuple
    left_eye: Optional[int] = None
    right_eye: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "lip_region", tuple(int(i) for i in self.lip_region))
        if not self.lip_region:
            raise LandmarkError("lip_region: must be non-empty")
        if self.upper_lip_center == self.lower_lip_center:
            raise LandmarkError("upper_lip_center: must differ from lower_lip_center")
        for name in ("upper_lip_center", "lower_lip_center", "left_eye", "right_eye"):
            v = getattr(self, name)
            if v is not None and int(v) < 0:
                raise LandmarkError(f"{name}: negative vertex index {v}")
        if any(i < 0 for i in self.lip_region):
            raise LandmarkError("lip_region: negative vertex index")

    @property
    def has_eyes(self) -> bool:
        return self.left_eye is not None and self.right_eye is not None

    def check(self, vertex_count: int) -> None:
        """Raise :class:`LandmarkError` if any index is out of range."""
        for name in ("upper_lip_center", "lower_lip_center", "left_eye", "right_eye"):
            v = getattr(self, name)
            if v is not None and v >= vertex_count:
                raise LandmarkError(f"{name}: index {v} out of range for V={vertex_count}")
        bad = [i for i in self.lip_region if i >= vertex_count]
        if bad:
            raise LandmarkError(f"lip_region: indices {bad} out of range for V={vertex_count}")

    def to_dict(self) -> dict:
        d = {
            "upper_lip_center": self.upper_lip_center,
            "lower_lip_center": self.lower_lip_center,
            "lip_region": list(self.lip_region),
        }
        if self.left_eye is not None:
            d["left_eye"] = self.left_eye
        if self.right_eye is not None:
            d["right_eye"] = self.right_eye
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "LandmarkSpec":
        return cls(
            upper_lip_center=d["upper_lip_center"],
            lower_lip_center=d["lower_lip_center"],
            lip_region=d["lip_region"],
            left_eye=d.get("left_eye"),
            right_eye=d.get("right_eye"),
        )


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    identity: str
    mesh_path: str
    landmarks: LandmarkSpec
    intensity_level: Optional[str] = None
    audio_path: Optional[str] = None
    embedding_path: Optional[str] = None

    def __post_init__(self):
        if not self.clip_id:
            raise SchemaError("clip_id: must be non-empty")
        if not self.identity:
            raise SchemaError(f"identity: must be non-empty (clip {self.clip_id})")
        if self.intensity_level == "none":
            object.__setattr__(self, "intensity_level", None)
        if self.intensity_level is not None and self.intensity_level not in INTENSITY_LEVELS:
            raise SchemaError(f"intensity_level: unknown level {self.intensity_level!r}")


@dataclass(frozen=True, eq=False)
class EmbeddingSet(_ArrayEq):
    """Paired speech/mesh window embeddings, each shaped ``(layers, G, H)``."""

    layers: tuple
    speech: np.ndarray
    mesh: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(l) for l in self.layers))
        speech = _frozen(self.speech, "speech", 3)
        mesh = _frozen(self.mesh, "mesh", 3)
        if speech.shape != mesh.shape:
            raise LengthError(f"mesh: shape {mesh.shape} differs from speech {speech.shape}")
        if speech.shape[0] != len(self.layers):
            raise LengthError(f"layers: {len(self.layers)} ids for {speech.shape[0]} layer blocks")
        if len(set(self.layers)) != len(self.layers):
            raise SchemaError("layers: duplicate layer id")
        if min(speech.shape) < 1:
            raise LengthError(f"speech: empty dimension in shape {speech.shape}")
        for name, arr in (("speech", speech), ("mesh", mesh)):
            norms = np.linalg.norm(arr, axis=-1)
            if np.any(norms <= 0):
                l, g = np.argwhere(norms <= 0)[0]
                raise DataError(f"{name}: zero-norm vector at layer {self.layers[l]}, window {g}")
        object.__setattr__(self, "speech", speech)
        object.__setattr__(self, "mesh", mesh)

    @property
    def windows(self) -> int:
        return self.speech.shape[1]

    @property
    def dim(self) -> int:
        return self.speech.shape[2]

    def layer_index(self, layer: int) -> int:
        try:
            return self.layers.index(int(layer))
        except ValueError:
            raise ConfigError(f"layer: {layer} not in {list(self.layers)}") from None


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.07
    lambda_contrastive: float = 1.0
    lambda_perceptual: float = 1e-7
    similarity: str = "cosine"

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"temperature: must be positive, got {self.temperature}")
        if not self.lambda_contrastive >= 0:
            raise ConfigError("lambda_contrastive: must be nonnegative")
        if not self.lambda_perceptual >= 0:
            raise ConfigError("lambda_perceptual: must be nonnegative")
        if self.similarity not in ("cosine", "dot"):
            raise ConfigError(f"similarity: expected 'cosine' or 'dot', got {self.similarity!r}")


@dataclass(frozen=True)
class MetricReport:
    """Per-clip values plus their corpus aggregate.

    ``per_clip`` maps clip ids to floats, or to ``(SI, LI)`` pairs for SLCC.
    """

    metric_name: str
    per_clip: Mapping[str, Any]
    aggregate: float
    unit: str = ""
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.per_clip:
            raise SchemaError("per_clip: a report must cover at least one clip")
        per_clip = {}
        for k, v in self.per_clip.items():
            per_clip[str(k)] = tuple(float(x) for x in v) if isinstance(v, (tuple, list)) else float(v)
        object.__setattr__(self, "per_clip", MappingProxyType(per_clip))
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))
        object.__setattr__(self, "aggregate", float(self.aggregate))

    @property
    def clip_count(self) -> int:
        return len(self.per_clip)


def check_mesh_pair(gt: MeshSequence, pred: MeshSequence, same_shape: bool = False) -> None:
    if gt.fps != pred.fps:
        raise ConfigError(f"fps: ground truth {gt.fps} != prediction {pred.fps}")
    if same_shape and gt.positions.shape != pred.positions.shape:
        raise ConfigError(
            f"positions: shape mismatch {gt.positions.shape} vs {pred.positions.shape}"
        )


def as_landmarks(lm: LandmarkSpec | Mapping) -> LandmarkSpec:
    if isinstance(lm, LandmarkSpec):
        return lm
    return LandmarkSpec.from_dict(lm)
