"""Contrastive and reconstruction losses as plain numerical functions.

These evaluate the objectives on fixed arrays; nothing here produces
gradients. Trainers can use them as reference values for their own
differentiable versions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .core import EmbeddingSet
from .errors import ConfigError, DataError, DegenerateError, LengthError

DEFAULT_TEMPERATURE = 0.07
PERCEPTUAL_WEIGHT = 1e-7


def _rows(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise LengthError(f"{name}: expected a non-empty (B, H) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name}: contains non-finite values")
    if np.any(np.linalg.norm(arr, axis=1) == 0):
        raise DataError(f"{name}: zero-norm row")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    """Row ``i`` of ``anchor`` and ``counterpart`` form the positive pair ``i``."""

    anchor: np.ndarray
    counterpart: np.ndarray

    def __post_init__(self):
        a = _rows(self.anchor, "anchor")
        c = _rows(self.counterpart, "counterpart")
        if a.shape != c.shape:
            raise LengthError(f"counterpart: shape {c.shape} differs from anchor {a.shape}")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "counterpart", c)

    @property
    def size(self) -> int:
        return self.anchor.shape[0]

    def swapped(self) -> "EmbeddingBatch":
        return EmbeddingBatch(self.counterpart, self.anchor)


@dataclass(frozen=True, eq=False)
class MaskedTokenBatch:
    """Token predictions and targets, ``(B, N, D)``, with a ``(B, N)`` mask.

    2-d inputs are treated as a batch of one item. ``True`` in the mask marks
    a masked (scored) token.
    """

    predicted: np.ndarray
    target: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        p = np.array(self.predicted, dtype=np.float64)
        t = np.array(self.target, dtype=np.float64)
        m = np.array(self.mask, dtype=bool)
        if p.ndim == 2:
            p, t, m = p[None], t[None], m.reshape(1, -1)
        if p.ndim != 3 or p.shape != t.shape:
            raise LengthError(f"target: shape {t.shape} incompatible with predicted {p.shape}")
        if m.shape != p.shape[:2]:
            raise LengthError(f"mask: shape {m.shape} does not match tokens {p.shape[:2]}")
        for name, arr in (("predicted", p), ("target", t), ("mask", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def similarity_matrix(a: np.ndarray, b: np.ndarray, similarity: str = "cosine") -> np.ndarray:
    if similarity == "cosine":
        a = a / np.linalg.norm(a, axis=1, keepdims=True)
        b = b / np.linalg.norm(b, axis=1, keepdims=True)
    elif similarity != "dot":
        raise ConfigError(f"similarity: expected 'cosine' or 'dot', got {similarity!r}")
    return a @ b.T


def info_nce(
    batch: EmbeddingBatch, temperature: float = DEFAULT_TEMPERATURE, similarity: str = "cosine"
) -> float:
    """Directional InfoNCE from anchors to counterparts.

    Cross-entropy of each anchor's softmax over all counterparts in the batch,
    with the matching row as the target class.
    """
    if not temperature > 0:
        raise ConfigError(f"temperature: must be positive, got {temperature}")
    logits = similarity_matrix(batch.anchor, batch.counterpart, similarity) / temperature
    log_prob = np.diag(logits) - logsumexp(logits, axis=1)
    return float(max(0.0, -np.mean(log_prob)))


def symmetric_contrastive(
    batches: Mapping[int, EmbeddingBatch],
    temperature: float = DEFAULT_TEMPERATURE,
    similarity: str = "cosine",
) -> float:
    """Sum over layers of both InfoNCE directions."""
    if not batches:
        raise LengthError("batches: need at least one layer")
    total = 0.0
    for layer in sorted(batches):
        b = batches[layer]
        total += info_nce(b, temperature, similarity)
        total += info_nce(b.swapped(), temperature, similarity)
    return total


def mae_loss(speech: MaskedTokenBatch, video: MaskedTokenBatch) -> float:
    """Masked reconstruction loss.

    For each batch item: squared error summed over the masked tokens of each
    modality, divided by that modality's masked-token count; the two terms are
    added and averaged over the batch.
    """
    if speech.predicted.shape[0] != video.predicted.shape[0]:
        raise LengthError("speech and video batches differ in size")
    total = np.zeros(speech.predicted.shape[0])
    for name, tb in (("speech", speech), ("video", video)):
        counts = tb.mask.sum(axis=1)
        if np.any(counts == 0):
            raise DegenerateError(f"{name}: batch item without masked tokens")
        sq = ((tb.predicted - tb.target) ** 2).sum(axis=2)
        total += np.where(tb.mask, sq, 0.0).sum(axis=1) / counts
    return float(total.mean())


def total_stage1_loss(mae: float, contrastive: float, lam: float) -> float:
    if lam < 0:
        raise ConfigError(f"lambda: must be nonnegative, got {lam}")
    if not (np.isfinite(mae) and np.isfinite(contrastive)):
        raise DataError("loss terms must be finite")
    return float(mae) + float(lam) * float(contrastive)


def perceptual_loss(
    batches: Mapping[int, EmbeddingBatch],
    temperature: float = DEFAULT_TEMPERATURE,
    weight: float = PERCEPTUAL_WEIGHT,
    similarity: str = "cosine",
) -> float:
    if weight < 0:
        raise ConfigError(f"weight: must be nonnegative, got {weight}")
    return weight * symmetric_contrastive(batches, temperature, similarity)


def batches_from_embeddings(emb: EmbeddingSet) -> dict:
    """Per-layer speech-to-mesh batches, one row per window."""
    return {
        layer: EmbeddingBatch(emb.speech[li], emb.mesh[li]) for li, layer in enumerate(emb.layers)
    }
