"""Perceptual lip readability score and lip vertex error."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .core import EmbeddingSet, LandmarkSpec, MeshSequence, MetricReport, check_mesh_pair
from .errors import ConfigError, LengthError
from .signal import cosine_similarity


@dataclass(frozen=True)
class WindowingConfig:
    """Window length and stride in frames.

    Evaluation uses non-overlapping 5-frame windows; loss extraction uses
    ``stride=1``.
    """

    window_frames: int = 5
    stride: int = 5

    def __post_init__(self):
        if int(self.window_frames) < 1:
            raise ConfigError(f"window_frames: must be >= 1, got {self.window_frames}")
        if int(self.stride) < 1:
            raise ConfigError(f"stride: must be >= 1, got {self.stride}")


def window_starts(frames: int, cfg: WindowingConfig) -> range:
    if frames < cfg.window_frames:
        raise LengthError(f"frames: {frames} < window of {cfg.window_frames}")
    return range(0, frames - cfg.window_frames + 1, cfg.stride)


def window_clip(mesh: MeshSequence, cfg: WindowingConfig | None = None) -> list[MeshSequence]:
    """Split a clip into fixed-length windows; a short trailing remainder is dropped."""
    cfg = cfg or WindowingConfig()
    return [
        MeshSequence(mesh.positions[s : s + cfg.window_frames], mesh.fps)
        for s in window_starts(mesh.frames, cfg)
    ]


def window_similarities(emb: EmbeddingSet, layer: Optional[int] = None) -> np.ndarray:
    li = len(emb.layers) - 1 if layer is None else emb.layer_index(layer)
    return np.array(
        [cosine_similarity(s, m) for s, m in zip(emb.speech[li], emb.mesh[li])]
    )


def plrs(emb: EmbeddingSet, layer: Optional[int] = None) -> MetricReport:
    """Mean cosine similarity between paired speech and mesh window embeddings.

    ``layer`` defaults to the last layer listed in the set. ``per_clip`` of
    the returned report holds the per-window similarities keyed
    ``w0000``, ``w0001``, ...
    """
    if layer is None:
        layer = emb.layers[-1]
    sims = window_similarities(emb, layer)
    return MetricReport(
        metric_name="plrs",
        per_clip={f"w{g:04d}": v for g, v in enumerate(sims)},
        aggregate=float(np.mean(sims)),
        unit="cosine",
        parameters={"layer": int(layer), "windows": int(sims.size)},
    )


def corpus_plrs(embeddings: Mapping[str, EmbeddingSet], layer: Optional[int] = None) -> MetricReport:
    per_clip = {cid: plrs(embeddings[cid], layer).aggregate for cid in sorted(embeddings)}
    return MetricReport(
        metric_name="plrs",
        per_clip=per_clip,
        aggregate=float(np.mean(list(per_clip.values()))),
        unit="cosine",
        parameters={"layer": "last" if layer is None else int(layer)},
    )


def lve(gt: MeshSequence, pred: MeshSequence, lm: LandmarkSpec, reduction: str = "max") -> float:
    """Lip vertex error in mesh units.

    Per frame, the L2 error over the lip region is reduced by ``max``
    (default) or ``mean``; the per-frame values are then averaged over time.
    """
    check_mesh_pair(gt, pred, same_shape=True)
    lm.check(gt.vertex_count)
    idx = list(lm.lip_region)
    err = np.linalg.norm(gt.positions[:, idx] - pred.positions[:, idx], axis=-1)
    if reduction == "max":
        per_frame = err.max(axis=1)
    elif reduction == "mean":
        per_frame = err.mean(axis=1)
    else:
        raise ConfigError(f"reduction: expected 'max' or 'mean', got {reduction!r}")
    return float(per_frame.mean())


def corpus_lve(clips: Mapping, reduction: str = "max") -> MetricReport:
    """``clips`` maps clip_id to ``(gt, pred, landmarks)``."""
    per_clip = {cid: lve(*clips[cid], reduction=reduction) for cid in sorted(clips)}
    return MetricReport(
        metric_name="lve",
        per_clip=per_clip,
        aggregate=float(np.mean(list(per_clip.values()))),
        unit="mesh units",
        parameters={"reduction": reduction},
    )
