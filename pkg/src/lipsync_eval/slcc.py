"""Speech-lip intensity correlation.

Speech intensity is the full-clip RMS, lip intensity the RMS over time of
the mean frame-to-frame lip-region displacement. Both are z-normalized
within each speaker identity before they are correlated across the corpus.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import INTENSITY_LEVELS, AudioClip, LandmarkSpec, MeshSequence, MetricReport
from .errors import ConfigError, DegenerateError, DegenerateGroupWarning, LengthError
from .signal import pearson, rms, z_normalize_by_group


@dataclass(frozen=True)
class IntensityTable:
    """Per-clip ``(SI, LI)`` z-scores and optional intensity levels."""

    per_clip: Mapping[str, tuple]
    levels: Mapping[str, Optional[str]] = field(default_factory=dict)
    warnings: tuple = ()

    def ids(self) -> list[str]:
        return sorted(self.per_clip)

    def columns(self, ids: Optional[Iterable[str]] = None) -> tuple[np.ndarray, np.ndarray]:
        ids = self.ids() if ids is None else list(ids)
        si = np.array([self.per_clip[k][0] for k in ids], dtype=np.float64)
        li = np.array([self.per_clip[k][1] for k in ids], dtype=np.float64)
        return si, li


def _znorm_recording(values, groups):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateGroupWarning)
        z = z_normalize_by_group(values, groups)
    msgs = [str(w.message) for w in caught if issubclass(w.category, DegenerateGroupWarning)]
    for m in msgs:
        warnings.warn(m, DegenerateGroupWarning, stacklevel=3)
    return z, msgs


def speech_intensity(clips: Iterable[tuple[str, str, AudioClip]]) -> dict:
    """``(clip_id, identity, audio)`` triples to identity-normalized RMS."""
    clips = list(clips)
    if not clips:
        raise LengthError("clips: need at least one clip")
    raw = {cid: rms(audio.samples) for cid, _, audio in clips}
    return z_normalize_by_group(raw, {cid: ident for cid, ident, _ in clips})


def lip_displacement(mesh: MeshSequence, lm: LandmarkSpec, eye_normalize: bool = False) -> float:
    """RMS over transitions of the mean lip-region vertex displacement.

    With ``eye_normalize`` the result is divided by the time-averaged
    inter-ocular distance, which makes clips on different mesh topologies
    comparable.
    """
    if mesh.frames < 2:
        raise LengthError(f"frames: need >= 2 frames, got {mesh.frames}")
    if eye_normalize and not lm.has_eyes:
        raise ConfigError("eye_normalize requires left_eye and right_eye landmarks")
    lm.check(mesh.vertex_count)
    lips = mesh.positions[:, list(lm.lip_region)]
    step = np.linalg.norm(lips[1:] - lips[:-1], axis=-1).mean(axis=1)
    dist = float(np.sqrt(np.mean(step * step)))
    if eye_normalize:
        eye = np.linalg.norm(mesh.positions[:, lm.left_eye] - mesh.positions[:, lm.right_eye], axis=-1)
        scale = float(eye.mean())
        if scale <= 0:
            raise DegenerateError("eye distance is zero; cannot normalize")
        dist /= scale
    return dist


def lip_intensity(
    clips: Iterable[tuple[str, str, MeshSequence, LandmarkSpec]], eye_normalize: bool = False
) -> dict:
    clips = list(clips)
    if not clips:
        raise LengthError("clips: need at least one clip")
    raw = {cid: lip_displacement(mesh, lm, eye_normalize) for cid, _, mesh, lm in clips}
    return z_normalize_by_group(raw, {cid: ident for cid, ident, _, _ in clips})


def intensity_table(
    speech_raw: Mapping[str, float],
    lip_raw: Mapping[str, float],
    identities: Mapping[str, str],
    levels: Optional[Mapping[str, Optional[str]]] = None,
) -> IntensityTable:
    """Build a table from raw RMS and displacement values.

    Degenerate identity groups are recorded in ``IntensityTable.warnings``.
    """
    if set(speech_raw) != set(lip_raw):
        raise ConfigError("speech and lip values cover different clips")
    si, w1 = _znorm_recording(dict(speech_raw), identities)
    li, w2 = _znorm_recording(dict(lip_raw), identities)
    ids = sorted(speech_raw)
    return IntensityTable(
        per_clip={k: (si[k], li[k]) for k in ids},
        levels={k: (levels or {}).get(k) for k in ids},
        warnings=tuple(f"speech: {m}" for m in w1) + tuple(f"lip: {m}" for m in w2),
    )


def slcc(table: IntensityTable, ids: Optional[Iterable[str]] = None) -> MetricReport:
    ids = table.ids() if ids is None else sorted(ids)
    if len(ids) < 2:
        raise DegenerateError(f"SLCC needs >= 2 clips, got {len(ids)}")
    si, li = table.columns(ids)
    r = pearson(si, li)
    return MetricReport(
        metric_name="slcc",
        per_clip={k: table.per_clip[k] for k in ids},
        aggregate=r,
        unit="pearson r",
        parameters={"warnings": list(table.warnings)},
    )


def levelwise_slcc(table: IntensityTable) -> dict:
    """Correlation per intensity level plus ``"overall"``.

    Levels with fewer than two clips, or with zero variance, map to ``None``.
    Clips without a level only contribute to the overall value.
    """
    out = {}
    for level in INTENSITY_LEVELS:
        ids = [k for k in table.ids() if table.levels.get(k) == level]
        if not ids:
            continue
        try:
            out[level] = slcc(table, ids).aggregate
        except DegenerateError:
            out[level] = None
    out["overall"] = slcc(table).aggregate
    return out


def slcc_delta(model: float, reference: float) -> float:
    """Absolute SLCC gap between a model and the reference data."""
    if not (np.isfinite(model) and np.isfinite(reference)):
        raise ConfigError("slcc_delta: inputs must be finite")
    return abs(float(model) - float(reference))
