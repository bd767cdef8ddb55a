"""The five augmentations and the map from policy strength to their parameters.

Feature-domain transforms (time mask, frequency mask, time stretch) act on a
``FeatureMatrix``; raw-domain transforms (SamplePairing, CutMix) act on a
``Waveform``. Every random transform is split into a ``draw_*`` helper that
consumes the generator and a deterministic core that applies the draws, so
callers can reproduce exactly which indices were touched.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_NUM_MASKS = 4
DEFAULT_N_CM = 6


class AugmentationKind(str, enum.Enum):
    TIME_MASK = "time_mask"
    FREQ_MASK = "freq_mask"
    TIME_STRETCH = "time_stretch"
    SAMPLE_PAIRING = "sample_pairing"
    CUTMIX = "cutmix"

    @property
    def index(self) -> int:
        return _KIND_ORDER.index(self)


_KIND_ORDER = tuple(AugmentationKind)

# kind -> (lower, upper, integer valued)
PARAM_RANGES = {
    AugmentationKind.TIME_MASK: (2, 6, True),
    AugmentationKind.FREQ_MASK: (2, 6, True),
    AugmentationKind.TIME_STRETCH: (0.2, 0.6, False),
    AugmentationKind.SAMPLE_PAIRING: (0.0, 0.1, False),
    AugmentationKind.CUTMIX: (1600.0, 4800.0, False),
}


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono PCM audio as float samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise InputError("waveform must be a non-empty 1-d sequence")
        peak = np.max(np.abs(x))
        if not peak <= 1.0:  # also catches NaN
            raise InputError(f"waveform samples must be finite and within [-1, 1], peak is {peak}")
        if self.sample_rate <= 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """T x F log-mel style features plus the framing they were computed with."""

    frames: np.ndarray
    frame_hop_ms: float = 10.0
    frame_len_ms: float = 25.0

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise InputError(f"feature matrix must be T x F with T, F >= 1, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise InputError("feature matrix contains non-finite values")
        if self.frame_hop_ms <= 0 or self.frame_len_ms <= 0:
            raise InputError("frame hop and length must be positive")
        object.__setattr__(self, "frames", f)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape

    def with_frames(self, frames: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(frames, self.frame_hop_ms, self.frame_len_ms)


@dataclass(frozen=True)
class AugmentationStrength:
    kind: AugmentationKind
    value: float

    def __post_init__(self):
        lo, hi, integral = PARAM_RANGES[self.kind]
        if not lo <= self.value <= hi:
            raise InputError(f"{self.kind.value} strength {self.value} outside [{lo}, {hi}]")
        if integral and self.value != int(self.value):
            raise InputError(f"{self.kind.value} strength must be an integer, got {self.value}")


def map_lambda(kind: AugmentationKind, lam: float) -> AugmentationStrength:
    """Map policy output ``lam`` in [0, 1] to the augmentation's own parameter.

    Mask widths are ``floor(2 + 4 lam)``; the stretch range, pairing weight and
    CutMix width are affine in ``lam``. Results are clamped to the parameter
    range so rounding at ``lam = 1`` cannot step outside it.
    """
    kind = AugmentationKind(kind)
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lam!r}")
    lo, hi, integral = PARAM_RANGES[kind]
    if integral:
        value = int(math.floor(2.0 + 4.0 * lam))
    elif kind is AugmentationKind.TIME_STRETCH:
        value = 0.2 + 0.4 * lam
    elif kind is AugmentationKind.SAMPLE_PAIRING:
        value = 0.1 * lam
    else:
        value = 1600.0 + 3200.0 * lam
    return AugmentationStrength(kind, min(hi, max(lo, value)))


# ---------------------------------------------------------------------------
# feature-domain transforms
# ---------------------------------------------------------------------------


def draw_mask_starts(rng: np.random.Generator, length: int, width: int, num_masks: int) -> np.ndarray:
    width = min(int(width), length)
    return rng.integers(0, length - width + 1, size=int(num_masks))


def _bounded_mean(a: np.ndarray, axis: int) -> np.ndarray:
    # clipping to [min, max] keeps a constant line bit-identical to its value
    return np.clip(a.mean(axis=axis), a.min(axis=axis), a.max(axis=axis))


def mask_time_at(feat: FeatureMatrix, starts, width: int) -> FeatureMatrix:
    """Replace frames ``[s, s + width)`` for each start with the per-bin temporal mean."""
    frames = feat.frames
    T = frames.shape[0]
    width = min(int(width), T)
    fill = _bounded_mean(frames, axis=0)
    out = frames.copy()
    for s in starts:
        out[int(s) : int(s) + width, :] = fill
    return feat.with_frames(out)


def mask_freq_at(feat: FeatureMatrix, starts, width: int) -> FeatureMatrix:
    """Replace bins ``[s, s + width)`` in every frame with that frame's spectral mean."""
    frames = feat.frames
    F = frames.shape[1]
    width = min(int(width), F)
    fill = _bounded_mean(frames, axis=1)
    out = frames.copy()
    for s in starts:
        out[:, int(s) : int(s) + width] = fill[:, None]
    return feat.with_frames(out)


def time_mask(feat: FeatureMatrix, m_t: int, num_masks: int = DEFAULT_NUM_MASKS, rng=None) -> FeatureMatrix:
    """Mask ``num_masks`` blocks of ``m_t`` consecutive frames at uniform random starts.

    A width larger than the utterance is clamped to ``T``.
    """
    if m_t < 1:
        raise InputError(f"mask width must be >= 1, got {m_t}")
    rng = np.random.default_rng(rng)
    starts = draw_mask_starts(rng, feat.shape[0], m_t, num_masks)
    return mask_time_at(feat, starts, m_t)


def freq_mask(feat: FeatureMatrix, m_f: int, num_masks: int = DEFAULT_NUM_MASKS, rng=None) -> FeatureMatrix:
    if m_f < 1:
        raise InputError(f"mask width must be >= 1, got {m_f}")
    rng = np.random.default_rng(rng)
    starts = draw_mask_starts(rng, feat.shape[1], m_f, num_masks)
    return mask_freq_at(feat, starts, m_f)


def stretched_length(T: int, rho: float) -> int:
    return math.floor((1.0 + rho) * T)


def stretch_indices(T: int, rho: float) -> np.ndarray:
    """Source frame for each output frame: ``floor(i / (1 + rho))``."""
    n = stretched_length(T, rho)
    if n < 1:
        return np.zeros(1, dtype=np.int64)
    idx = np.floor(np.arange(n) / (1.0 + rho)).astype(np.int64)
    return np.minimum(idx, T - 1)


def stretch_by(feat: FeatureMatrix, rho: float) -> FeatureMatrix:
    if not -1.0 < rho < 1.0:
        raise InputError(f"stretch ratio must lie in (-1, 1), got {rho}")
    if rho == 0.0:
        return feat.with_frames(feat.frames.copy())
    return feat.with_frames(feat.frames[stretch_indices(feat.shape[0], rho)])


def draw_stretch_ratio(rng: np.random.Generator, rho0: float) -> float:
    return float(rng.uniform(-rho0, rho0))


def time_stretch(feat: FeatureMatrix, rho0: float, rng=None) -> FeatureMatrix:
    """Resample frames by a ratio ``rho`` drawn from U(-rho0, rho0)."""
    if not 0.0 <= rho0 < 1.0:
        raise InputError(f"rho0 must lie in [0, 1), got {rho0}")
    rng = np.random.default_rng(rng)
    return stretch_by(feat, draw_stretch_ratio(rng, rho0))


# ---------------------------------------------------------------------------
# raw-domain transforms
# ---------------------------------------------------------------------------


def _check_pair(x_i: Waveform, x_j: Waveform) -> None:
    if x_i.sample_rate != x_j.sample_rate:
        raise InputError(f"sample rate mismatch: {x_i.sample_rate} vs {x_j.sample_rate}")


def fit_length(x: np.ndarray, n: int) -> np.ndarray:
    """Repeat-pad or clip ``x`` to exactly ``n`` samples."""
    reps = -(-n // x.size)
    return np.tile(x, reps)[:n]


def sample_pairing(x_i: Waveform, x_j: Waveform, lambda_sp: float) -> Waveform:
    """Mix ``(1 - lambda_sp) x_i + lambda_sp x_j``, keeping the length of ``x_i``."""
    _check_pair(x_i, x_j)
    if not 0.0 <= lambda_sp <= 0.1:
        raise InputError(f"lambda_sp must lie in [0, 0.1], got {lambda_sp}")
    if lambda_sp == 0.0:
        return Waveform(x_i.samples.copy(), x_i.sample_rate)
    partner = fit_length(x_j.samples, len(x_i))
    mixed = (1.0 - lambda_sp) * x_i.samples + lambda_sp * partner
    return Waveform(np.clip(mixed, -1.0, 1.0), x_i.sample_rate)


def draw_cutmix_starts(rng: np.random.Generator, len_i: int, len_j: int, w: int, n_cm: int):
    w = min(int(w), len_i, len_j)
    starts_i = rng.integers(0, len_i - w + 1, size=int(n_cm))
    starts_j = rng.integers(0, len_j - w + 1, size=int(n_cm))
    return starts_i, starts_j


def cutmix_at(x_i: Waveform, x_j: Waveform, w: int, starts_i, starts_j) -> Waveform:
    """Copy ``x_j[t_j : t_j + w]`` over ``x_i[t_i : t_i + w]`` for each start pair, in order."""
    _check_pair(x_i, x_j)
    w = min(int(w), len(x_i), len(x_j))
    out = x_i.samples.copy()
    src = x_j.samples
    for ti, tj in zip(starts_i, starts_j):
        out[int(ti) : int(ti) + w] = src[int(tj) : int(tj) + w]
    return Waveform(out, x_i.sample_rate)


def cutmix(x_i: Waveform, x_j: Waveform, w: int, n_cm: int = DEFAULT_N_CM, rng=None) -> Waveform:
    """Replace ``n_cm`` width-``w`` segments of ``x_i`` with segments of ``x_j``.

    Starts in each waveform are uniform and independent; a later segment
    overwrites an earlier one where they overlap. Labels are not touched.
    """
    _check_pair(x_i, x_j)
    if w < 1:
        raise InputError(f"segment width must be >= 1, got {w}")
    if n_cm < 0:
        raise InputError(f"n_cm must be >= 0, got {n_cm}")
    rng = np.random.default_rng(rng)
    starts_i, starts_j = draw_cutmix_starts(rng, len(x_i), len(x_j), w, n_cm)
    return cutmix_at(x_i, x_j, w, starts_i, starts_j)
