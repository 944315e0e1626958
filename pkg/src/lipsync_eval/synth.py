"""Synthetic fixtures and brute-force oracles.

The synthetic face has 16 vertices::

    0        upper lip center
    1        lower lip center
    2..7     upper lip region
    8..13    lower lip region
    14, 15   left / right eye

Everything here is a pure function of its arguments and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AudioClip, EmbeddingSet, LandmarkSpec, MeshSequence
from .errors import ConfigError, LengthError
from .readability import WindowingConfig
from .signal import as_series

VERTEX_COUNT = 16
LANDMARKS = LandmarkSpec(
    upper_lip_center=0,
    lower_lip_center=1,
    lip_region=tuple(range(2, 14)),
    left_eye=14,
    right_eye=15,
)

_LIP_WIDTH = 0.025
_EYE_HALF_SPAN = 0.032
_EYE_HEIGHT = 0.045
# per-vertex share of the aperture; corners move less than the center
_REGION_X = np.linspace(-1.0, 1.0, 6)
_REGION_WEIGHT = np.cos(_REGION_X * np.pi / 3.0)


@dataclass(frozen=True)
class SynthSpec:
    duration_s: float = 3.0
    fps: float = 25.0
    mouth_hz: float = 2.0
    amplitude: float = 0.01
    noise_sigma: float = 0.0
    offset_frames: int = 0
    intensity_gain: float = 1.0
    seed: int = 0
    sample_rate: int = 16000
    carrier_hz: float = 200.0
    audio_level: float = 0.25

    def __post_init__(self):
        if self.fps <= 0:
            raise ConfigError(f"fps: must be positive, got {self.fps}")
        if self.frames < 4:
            raise ConfigError(f"duration_s: {self.duration_s} s at {self.fps} fps gives < 4 frames")
        if not 0 < self.mouth_hz < self.fps / 2:
            raise ConfigError(f"mouth_hz: {self.mouth_hz} violates Nyquist for fps={self.fps}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma: must be nonnegative")
        if self.intensity_gain <= 0:
            raise ConfigError("intensity_gain: must be positive")
        if self.amplitude <= 0:
            raise ConfigError("amplitude: must be positive")

    @property
    def frames(self) -> int:
        return int(round(self.duration_s * self.fps))


def shift_track(values, offset: int) -> np.ndarray:
    """Delay (positive ``offset``) or advance a per-frame track, holding edges."""
    values = np.asarray(values)
    idx = np.clip(np.arange(values.shape[0]) - int(offset), 0, values.shape[0] - 1)
    return values[idx]


def shift_mesh(mesh: MeshSequence, offset: int) -> MeshSequence:
    """Temporal-offset injector: delay a mesh by ``offset`` frames with edge hold."""
    return MeshSequence(shift_track(mesh.positions, offset), mesh.fps)


def aperture_track(spec: SynthSpec) -> np.ndarray:
    """Lip aperture per frame before any offset is applied."""
    t = np.arange(spec.frames) / spec.fps
    # one open/close cycle per 1 / mouth_hz seconds
    ap = spec.amplitude * np.abs(np.sin(np.pi * spec.mouth_hz * t))
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        ap = ap + rng.normal(0.0, spec.noise_sigma, size=ap.shape)
    return spec.intensity_gain * ap


def mesh_from_aperture(aperture, fps: float) -> MeshSequence:
    ap = np.asarray(aperture, dtype=np.float64)
    T = ap.shape[0]
    pos = np.zeros((T, VERTEX_COUNT, 3))
    half = 0.5 * ap
    pos[:, 0, 1] = half
    pos[:, 1, 1] = -half
    region_x = _LIP_WIDTH * _REGION_X
    pos[:, 2:8, 0] = region_x
    pos[:, 2:8, 1] = half[:, None] * _REGION_WEIGHT
    pos[:, 8:14, 0] = region_x
    pos[:, 8:14, 1] = -half[:, None] * _REGION_WEIGHT
    pos[:, 14] = (-_EYE_HALF_SPAN, _EYE_HEIGHT, 0.0)
    pos[:, 15] = (_EYE_HALF_SPAN, _EYE_HEIGHT, 0.0)
    return MeshSequence(pos, fps)


def audio_from_envelope(envelope, spec: SynthSpec) -> AudioClip:
    """Amplitude-modulated carrier; the envelope is held constant per video frame."""
    env = np.asarray(envelope, dtype=np.float64)
    n = int(round(env.shape[0] * spec.sample_rate / spec.fps))
    t = np.arange(n) / spec.sample_rate
    frame = np.minimum((t * spec.fps).astype(np.int64), env.shape[0] - 1)
    samples = env[frame] * np.sin(2.0 * np.pi * spec.carrier_hz * t)
    return AudioClip(np.clip(samples, -1.0, 1.0), spec.sample_rate)


def make_clip(spec: SynthSpec) -> tuple[MeshSequence, AudioClip, LandmarkSpec]:
    """Parametric talking-mouth clip.

    The mesh follows the (optionally delayed) aperture track; the audio
    envelope follows the undelayed aperture, so a positive ``offset_frames``
    makes the speech lead the mesh.
    """
    ap = aperture_track(spec)
    mesh = mesh_from_aperture(shift_track(ap, spec.offset_frames), spec.fps)
    envelope = spec.audio_level * ap / spec.amplitude
    return mesh, audio_from_envelope(envelope, spec), LANDMARKS


def make_intensity_corpus(
    n_clips: int = 500,
    n_identities: int = 10,
    coupling: float = 0.6,
    noise: float = 0.2,
    seed: int = 0,
    duration_s: float = 1.0,
    fps: float = 25.0,
):
    """Clips whose lip intensity is a noisy linear function of speech intensity.

    For each clip a latent speech score ``s ~ N(0, 1)`` is drawn; speech RMS
    is an identity-specific affine map of ``s`` and lip displacement an
    identity-specific affine map of ``coupling * s + noise * e``. Returns a
    list of ``(clip_id, identity, mesh, audio, landmarks)`` plus the latent
    arrays ``(s, lip_latent)`` for oracle use.
    """
    rng = np.random.default_rng(seed)
    base = SynthSpec(duration_s=duration_s, fps=fps, mouth_hz=2.0, seed=seed)
    unit_ap = aperture_track(base) / base.amplitude
    unit_mesh = mesh_from_aperture(unit_ap, fps)
    unit_audio = audio_from_envelope(unit_ap, base)
    s = rng.normal(size=n_clips)
    e = rng.normal(size=n_clips)
    lip_latent = coupling * s + noise * e
    ids = [f"id{k % n_identities:02d}" for k in range(n_clips)]
    speech_gain = rng.uniform(0.5, 1.5, size=n_identities)
    lip_gain = rng.uniform(0.5, 1.5, size=n_identities)
    clips = []
    for k in range(n_clips):
        g = k % n_identities
        rms_scale = speech_gain[g] * (0.3 + 0.04 * s[k])
        lip_scale = lip_gain[g] * (0.01 + 0.001 * lip_latent[k])
        mesh = MeshSequence(unit_mesh.positions * lip_scale, fps)
        audio = AudioClip(unit_audio.samples * rms_scale, unit_audio.sample_rate)
        clips.append((f"clip_{k:04d}", ids[k], mesh, audio, LANDMARKS))
    return clips, (s, lip_latent)


# -- test featurizer -------------------------------------------------------


def _frame_envelope_from_audio(audio: AudioClip, frames: int, fps: float) -> np.ndarray:
    """Per-video-frame RMS of the audio, rescaled so a unit sine maps to 1."""
    spf = audio.sample_rate / fps
    env = np.zeros(frames)
    for t in range(frames):
        seg = audio.samples[int(round(t * spf)) : int(round((t + 1) * spf))]
        env[t] = math.sqrt(2.0 * float(np.mean(seg * seg))) if seg.size else 0.0
    return env


def _window_features(envelope: np.ndarray, starts, width: int) -> np.ndarray:
    peak = float(np.max(np.abs(envelope)))
    env = envelope / peak if peak > 0 else envelope
    feats = []
    for s in starts:
        w = env[s : s + width]
        d = np.diff(w) if width > 1 else np.zeros(1)
        feats.append([w.mean(), math.sqrt(float(np.mean(d * d)))])
    feats = np.asarray(feats)
    # center across windows so that only the temporal pattern is compared
    feats = feats - feats.mean(axis=0)
    return np.hstack([feats, np.ones((len(starts), 1))])


def test_featurizer(
    speech: AudioClip,
    mesh: MeshSequence,
    cfg: WindowingConfig | None = None,
    dim: int = 16,
    seed: int = 0,
    layers=(0,),
) -> EmbeddingSet:
    """Deterministic stand-in for trained speech and mesh encoders.

    Each side reduces its modality to a per-frame activity envelope (lip
    aperture for the mesh, frame RMS for the audio), summarizes every window
    by level and rate of change, and maps the result through one seeded
    random projection per layer. Synchronized pairs therefore embed almost
    identically; misaligned windows do not.
    """
    cfg = cfg or WindowingConfig()
    if mesh.frames < cfg.window_frames:
        raise LengthError(f"frames: {mesh.frames} < window of {cfg.window_frames}")
    starts = list(range(0, mesh.frames - cfg.window_frames + 1, cfg.stride))
    mesh_env = _lip_aperture(mesh)
    speech_env = _frame_envelope_from_audio(speech, mesh.frames, mesh.fps)
    fm = _window_features(mesh_env, starts, cfg.window_frames)
    fs = _window_features(speech_env, starts, cfg.window_frames)
    rng = np.random.default_rng(seed)
    proj = rng.normal(size=(len(layers), fm.shape[1], dim))
    return EmbeddingSet(
        layers=tuple(layers),
        speech=np.einsum("gf,lfh->lgh", fs, proj),
        mesh=np.einsum("gf,lfh->lgh", fm, proj),
    )


test_featurizer.__test__ = False  # not a pytest test despite the name


def _lip_aperture(mesh: MeshSequence) -> np.ndarray:
    from .mtm import lip_distance_sequence

    return lip_distance_sequence(mesh, LANDMARKS)


def shuffle_windows(emb: EmbeddingSet, seed: int = 0) -> EmbeddingSet:
    """Permute the mesh-side windows with a seeded non-identity permutation."""
    G = emb.windows
    if G < 2:
        raise LengthError("windows: need >= 2 windows to shuffle")
    rng = np.random.default_rng(seed)
    perm = np.arange(G)
    while np.array_equal(perm, np.arange(G)):
        perm = rng.permutation(G)
    return EmbeddingSet(emb.layers, emb.speech, emb.mesh[:, perm])


# -- brute-force oracles -----------------------------------------------------


def brute_force_dtw(a, b) -> float:
    """Minimum |a_i - b_j| path cost by enumerating every monotone path."""
    a = as_series(a, name="a").tolist()
    b = as_series(b, name="b").tolist()
    n, m = len(a), len(b)
    if n * m > 64:
        raise ConfigError(f"brute_force_dtw: {n}x{m} exceeds the 64-cell cap")
    cost = [[abs(x - y) for y in b] for x in a]
    best = [float("inf")]

    def walk(i, j, acc):
        acc = acc + cost[i][j]
        if i == n - 1 and j == m - 1:
            if acc < best[0]:
                best[0] = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


# -- on-disk fixtures --------------------------------------------------------


def _level_for_gain(gain: float) -> str:
    if gain < 1.0:
        return "Lv1"
    if gain < 1.5:
        return "Lv2"
    return "Lv3"


def write_fixture_corpus(
    out_dir,
    n_clips: int = 6,
    n_identities: int = 2,
    duration_s: float = 3.0,
    fps: float = 25.0,
    mouth_hz: float = 2.0,
    noise_sigma: float = 0.0,
    offset_frames: int = 0,
    seed: int = 0,
    dim: int = 16,
    windowing: WindowingConfig | None = None,
):
    """Write MSH1/WAV/EMB1 fixtures plus ``gt.json`` and ``pred.json`` manifests.

    Prediction meshes are the ground truth delayed by ``offset_frames``; both
    manifests share the audio. Returns the two manifest paths.
    """
    from pathlib import Path

    from . import io as lio
    from .core import ClipRecord

    if n_clips < 1 or n_identities < 1:
        raise ConfigError("n_clips and n_identities must be >= 1")
    out = Path(out_dir)
    for sub in ("gt", "pred", "audio"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    gains = rng.uniform(0.5, 2.0, size=n_clips)
    gt_records, pred_records = [], []
    for n in range(n_clips):
        cid = f"clip_{n:03d}"
        spec = SynthSpec(
            duration_s=duration_s,
            fps=fps,
            mouth_hz=mouth_hz,
            noise_sigma=noise_sigma,
            intensity_gain=float(gains[n]),
            seed=seed * 1000 + n,
        )
        mesh, audio, lm = make_clip(spec)
        pred = shift_mesh(mesh, offset_frames)
        paths = {
            "gt": out / "gt" / f"{cid}.msh",
            "pred": out / "pred" / f"{cid}.msh",
            "audio": out / "audio" / f"{cid}.wav",
            "gt_emb": out / "gt" / f"{cid}.emb",
            "pred_emb": out / "pred" / f"{cid}.emb",
        }
        lio.write_mesh(mesh, paths["gt"])
        lio.write_mesh(pred, paths["pred"])
        lio.write_wav(audio, paths["audio"])
        lio.write_embeddings(test_featurizer(audio, mesh, windowing, dim, seed), paths["gt_emb"])
        lio.write_embeddings(test_featurizer(audio, pred, windowing, dim, seed), paths["pred_emb"])
        common = dict(
            clip_id=cid,
            identity=f"speaker_{n % n_identities:02d}",
            landmarks=lm,
            intensity_level=_level_for_gain(float(gains[n])),
            audio_path=str(paths["audio"]),
        )
        gt_records.append(ClipRecord(mesh_path=str(paths["gt"]), embedding_path=str(paths["gt_emb"]), **common))
        pred_records.append(
            ClipRecord(mesh_path=str(paths["pred"]), embedding_path=str(paths["pred_emb"]), **common)
        )
    gt_path, pred_path = out / "gt.json", out / "pred.json"
    lio.write_manifest(lio.Manifest(1, LANDMARKS, gt_records), gt_path)
    lio.write_manifest(lio.Manifest(1, LANDMARKS, pred_records), pred_path)
    return gt_path, pred_path
