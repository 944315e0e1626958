"""1-D numerical primitives shared by the metrics."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from typing import Hashable, Mapping

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DataError, DegenerateError, DegenerateGroupWarning, LengthError

MAX = "max"
MIN = "min"


def as_series(values, min_length: int = 1, name: str = "series") -> np.ndarray:
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 1:
        raise LengthError(f"{name}: expected 1-d sequence, got shape {s.shape}")
    if s.size < min_length:
        raise LengthError(f"{name}: need length >= {min_length}, got {s.size}")
    if not np.all(np.isfinite(s)):
        raise DataError(f"{name}: contains non-finite values")
    return s


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized Gaussian weights truncated at radius ``ceil(4 * sigma)``."""
    if not sigma > 0:
        raise DataError(f"sigma: must be positive, got {sigma}")
    radius = math.ceil(4.0 * sigma)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def gaussian_smooth(series, sigma: float = 1.0) -> np.ndarray:
    """Gaussian-smooth a series with half-sample symmetric (reflect) padding.

    The boundary mode repeats the edge sample (``d c b a | a b c d``), so a
    constant series is preserved exactly and no artificial extrema appear at
    the ends.
    """
    s = as_series(series)
    return correlate1d(s, gaussian_kernel(sigma), mode="reflect")


def first_difference(series) -> np.ndarray:
    s = as_series(series, min_length=2)
    return s[1:] - s[:-1]


def local_extrema(series) -> list[tuple[int, str]]:
    """Strict interior turning points, sorted by index.

    A run of equal values flanked by two lower neighbours is a maximum, by
    two higher neighbours a minimum; the run reports its leftmost index.
    Runs touching either end of the series are never reported.
    """
    s = np.asarray(series, dtype=np.float64)
    if s.size < 3:
        return []
    # collapse plateaus to their first index
    starts = np.flatnonzero(np.concatenate(([True], s[1:] != s[:-1])))
    vals = s[starts]
    out = []
    for r in range(1, len(starts) - 1):
        left, mid, right = vals[r - 1], vals[r], vals[r + 1]
        if left < mid > right:
            out.append((int(starts[r]), MAX))
        elif left > mid < right:
            out.append((int(starts[r]), MIN))
    return out


def rms(samples) -> float:
    x = as_series(samples, name="samples")
    return float(np.sqrt(np.mean(x * x)))


def z_normalize_by_group(
    values: Mapping[Hashable, float], group_of: Mapping[Hashable, Hashable]
) -> dict:
    """Standardize values within each group using the population std.

    Groups with a single member or zero variance map to 0 and emit a
    :class:`DegenerateGroupWarning`.
    """
    groups = defaultdict(list)
    for key in values:
        groups[group_of[key]].append(key)
    out = {}
    for g in sorted(groups, key=str):
        # canonical member order keeps the sums independent of input order
        keys = sorted(groups[g], key=str)
        x = np.array([values[k] for k in keys], dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise DataError(f"values: non-finite entry in group {g!r}")
        mu = x.mean()
        sd = np.sqrt(np.mean((x - mu) ** 2))
        # exact-equality test: the mean of identical floats can be off by an ulp
        if len(keys) < 2 or np.all(x == x[0]) or sd == 0.0:
            warnings.warn(
                f"group {g!r}: {len(keys)} member(s) with zero variance; normalized to 0",
                DegenerateGroupWarning,
                stacklevel=2,
            )
            z = np.zeros_like(x)
        else:
            z = (x - mu) / sd
        out.update(zip(keys, z.tolist()))
    return {k: out[k] for k in values}


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DataError("cosine similarity undefined for a zero-norm vector")
    c = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, c))


def pearson(x, y) -> float:
    x = as_series(x, min_length=2, name="x")
    y = as_series(y, min_length=2, name="y")
    if x.size != y.size:
        raise LengthError(f"length mismatch: {x.size} vs {y.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise DegenerateError("pearson: zero variance input")
    r = float(np.dot(dx, dy) / (np.sqrt(sxx) * np.sqrt(syy)))
    return min(1.0, max(-1.0, r))
