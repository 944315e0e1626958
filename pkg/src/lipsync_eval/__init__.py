"""Lip-sync evaluation: MTM, SLCC, PLRS and LVE metrics plus contrastive losses."""

from .core import (
    AudioClip,
    ClipRecord,
    EmbeddingSet,
    LandmarkSpec,
    LossConfig,
    MeshSequence,
    MetricReport,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateError,
    DegenerateGroupWarning,
    FormatError,
    IoError,
    LandmarkError,
    LengthError,
    LipSyncError,
    MissingAssetError,
    SchemaError,
    TruncationError,
)
from .estimators import GaussianSmoother, IdentityZNormalizer
from .loss import (
    EmbeddingBatch,
    MaskedTokenBatch,
    info_nce,
    mae_loss,
    perceptual_loss,
    symmetric_contrastive,
    total_stage1_loss,
)
from .mtm import AlignmentPath, MtmClipResult, clip_mtm, corpus_mtm, ddtw_align, match_extrema
from .readability import WindowingConfig, lve, plrs, window_clip
from .slcc import IntensityTable, levelwise_slcc, slcc, slcc_delta

__version__ = "0.1.0"

__all__ = [
    "AlignmentPath",
    "AudioClip",
    "ClipRecord",
    "ConfigError",
    "DataError",
    "DegenerateError",
    "DegenerateGroupWarning",
    "EmbeddingBatch",
    "EmbeddingSet",
    "FormatError",
    "GaussianSmoother",
    "IdentityZNormalizer",
    "IntensityTable",
    "IoError",
    "LandmarkError",
    "LandmarkSpec",
    "LengthError",
    "LipSyncError",
    "LossConfig",
    "MaskedTokenBatch",
    "MeshSequence",
    "MetricReport",
    "MissingAssetError",
    "MtmClipResult",
    "SchemaError",
    "TruncationError",
    "WindowingConfig",
    "clip_mtm",
    "corpus_mtm",
    "ddtw_align",
    "info_nce",
    "levelwise_slcc",
    "lve",
    "mae_loss",
    "match_extrema",
    "perceptual_loss",
    "plrs",
    "slcc",
    "slcc_delta",
    "symmetric_contrastive",
    "total_stage1_loss",
    "window_clip",
]
