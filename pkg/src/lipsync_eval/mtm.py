"""Mean Temporal Misalignment.

The pipeline per clip: lip-center distance over time, Gaussian smoothing,
first difference, derivative DTW alignment, then same-type extrema matching
along the alignment path. The clip score is the mean frame gap of matched
extrema; the corpus score is the mean over clips, in milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import LandmarkSpec, MeshSequence, MetricReport, check_mesh_pair
from .errors import DegenerateError, LengthError
from .signal import MAX, MIN, as_series, first_difference, gaussian_smooth, local_extrema

MIN_FRAMES = 4


@dataclass(frozen=True)
class AlignmentPath:
    pairs: tuple
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        if not self.pairs or self.pairs[0] != (0, 0):
            raise LengthError("pairs: path must start at (0, 0)")
        for (i0, j0), (i1, j1) in zip(self.pairs, self.pairs[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise LengthError(f"pairs: illegal step ({i0},{j0}) -> ({i1},{j1})")

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class MtmClipResult:
    clip_id: str
    matched_pairs: int
    delta_t_frames: float
    fps: float
    pairs: tuple = ()

    @property
    def delta_t_ms(self) -> float:
        return self.delta_t_frames * 1000.0 / self.fps


def lip_distance_sequence(mesh: MeshSequence, lm: LandmarkSpec) -> np.ndarray:
    """Euclidean distance between the upper and lower lip centers per frame."""
    lm.check(mesh.vertex_count)
    diff = mesh.positions[:, lm.upper_lip_center] - mesh.positions[:, lm.lower_lip_center]
    return np.sqrt(np.sum(diff * diff, axis=1))


def ddtw_align(a, b) -> AlignmentPath:
    """Optimal monotone alignment of two derivative sequences.

    Local cost is ``|a[i] - b[j]|`` with steps (1,0), (0,1), (1,1) and no
    slope constraint. Ties are broken toward the diagonal, then (1,0), then
    (0,1), which makes the returned path deterministic.
    """
    a = as_series(a, name="a").tolist()
    b = as_series(b, name="b").tolist()
    n, m = len(a), len(b)
    inf = float("inf")
    acc = [[inf] * m for _ in range(n)]
    for i in range(n):
        ai = a[i]
        row = acc[i]
        prev = acc[i - 1] if i else None
        for j in range(m):
            c = abs(ai - b[j])
            if i == 0 and j == 0:
                row[j] = c
                continue
            best = inf
            if i and j:
                best = prev[j - 1]
            if i and prev[j] < best:
                best = prev[j]
            if j and row[j - 1] < best:
                best = row[j - 1]
            row[j] = best + c

    i, j = n - 1, m - 1
    pairs = [(i, j)]
    while i or j:
        if i and j:
            diag, up, left = acc[i - 1][j - 1], acc[i - 1][j], acc[i][j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        elif i:
            i -= 1
        else:
            j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return AlignmentPath(pairs, acc[n - 1][m - 1])


def _neighbour_bounds(indices: Sequence[int], length: int) -> dict:
    bounds = {}
    for p, idx in enumerate(indices):
        lo = indices[p - 1] if p > 0 else -1
        hi = indices[p + 1] if p + 1 < len(indices) else length
        bounds[idx] = (lo, hi)
    return bounds


def match_extrema(gt_deriv, pred_deriv, path: AlignmentPath | Iterable) -> list[tuple[int, int]]:
    """Aligned pairs linking same-type extrema of the two derivative series.

    A pair ``(i, j)`` on the path qualifies when ``i`` is an extremum of the
    ground truth, ``j`` an extremum of the prediction of the same kind, and
    ``j`` lies strictly between the ground-truth extrema of that kind which
    precede and follow ``i`` (the sequence ends act as virtual neighbours at
    -1 and ``len``). A match can therefore never span a full open/close
    cycle of the ground truth.
    """
    gt_ext = local_extrema(gt_deriv)
    pred_kind = dict(local_extrema(pred_deriv))
    gt_kind = dict(gt_ext)
    bounds = {}
    for kind in (MAX, MIN):
        bounds.update(_neighbour_bounds([i for i, k in gt_ext if k == kind], len(gt_deriv)))
    out = []
    seen = set()
    for i, j in path:
        kind = gt_kind.get(i)
        if kind is None or pred_kind.get(j) != kind:
            continue
        lo, hi = bounds[i]
        if lo < j < hi and (i, j) not in seen:
            seen.add((i, j))
            out.append((i, j))
    return out


def clip_mtm(
    gt: MeshSequence,
    pred: MeshSequence,
    lm: LandmarkSpec,
    sigma: float = 1.0,
    clip_id: str = "",
) -> Optional[MtmClipResult]:
    """Temporal misalignment of one clip, or ``None`` if no extrema matched."""
    check_mesh_pair(gt, pred)
    if gt.frames < MIN_FRAMES or pred.frames < MIN_FRAMES:
        raise LengthError(
            f"frames: need >= {MIN_FRAMES} frames, got {gt.frames} (gt) / {pred.frames} (pred)"
        )
    d_gt = first_difference(gaussian_smooth(lip_distance_sequence(gt, lm), sigma))
    d_pred = first_difference(gaussian_smooth(lip_distance_sequence(pred, lm), sigma))
    path = ddtw_align(d_gt, d_pred)
    pairs = match_extrema(d_gt, d_pred, path)
    if not pairs:
        return None
    gaps = [abs(i - j) for i, j in pairs]
    return MtmClipResult(
        clip_id=clip_id,
        matched_pairs=len(pairs),
        delta_t_frames=float(np.mean(gaps)),
        fps=gt.fps,
        pairs=tuple(pairs),
    )


def mtm_report(results: Mapping[str, Optional[MtmClipResult]], sigma: float) -> MetricReport:
    """Aggregate per-clip results (``None`` marks an undefined clip)."""
    ids = sorted(results)
    defined = [k for k in ids if results[k] is not None]
    undefined = [k for k in ids if results[k] is None]
    if not defined:
        raise DegenerateError("MTM undefined: no clip produced a matched extremum pair")
    per_clip = {k: results[k].delta_t_ms for k in defined}
    aggregate = float(np.mean([per_clip[k] for k in defined]))
    return MetricReport(
        metric_name="mtm",
        per_clip=per_clip,
        aggregate=aggregate,
        unit="ms",
        parameters={
            "sigma": float(sigma),
            "undefined_clips": undefined,
            "matched_pairs": {k: results[k].matched_pairs for k in defined},
            "delta_t_frames": {k: results[k].delta_t_frames for k in defined},
        },
    )


def corpus_mtm(clips, sigma: float = 1.0) -> MetricReport:
    """MTM over a corpus.

    ``clips`` is either a mapping ``clip_id -> (gt, pred, landmarks)`` or a
    sequence of such triples (ids are then ``clip_000``, ``clip_001``, ...).
    """
    if not isinstance(clips, Mapping):
        clips = {f"clip_{n:03d}": c for n, c in enumerate(clips)}
    results = {
        cid: clip_mtm(gt, pred, lm, sigma=sigma, clip_id=cid)
        for cid, (gt, pred, lm) in clips.items()
    }
    return mtm_report(results, sigma)
