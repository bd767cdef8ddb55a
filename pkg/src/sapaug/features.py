"""Minimal log-mel front end turning a ``Waveform`` into a ``FeatureMatrix``."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .augment import FeatureMatrix, Waveform
from .errors import InputError


@dataclass(frozen=True)
class FeaturizerConfig:
    frame_len_ms: float = 25.0
    frame_hop_ms: float = 10.0
    n_mels: int = 80
    n_fft: int | None = None  # defaults to the next power of two >= window
    log_floor: float = 1e-10

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000.0))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_hop_ms * sample_rate / 1000.0))

    def fft_size(self, sample_rate: int) -> int:
        if self.n_fft is not None:
            return self.n_fft
        win = self.window_samples(sample_rate)
        return 1 << (win - 1).bit_length()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters (HTK mel scale) on [0, sample_rate/2], shape ``(n_mels, n_fft//2 + 1)``."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lower) / (center - lower)
    falling = (upper - bins) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


@lru_cache(maxsize=16)
def _filterbank_t(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    fbt = np.ascontiguousarray(mel_filterbank(n_mels, n_fft, sample_rate).T, dtype=np.float32)
    fbt.setflags(write=False)
    return fbt


@lru_cache(maxsize=16)
def _hann(n: int) -> np.ndarray:
    w = (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)).astype(np.float32)
    w.setflags(write=False)
    return w


def frame_count(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 1
    return 1 + (n_samples - window) // hop


def featurize(x: Waveform, config: FeaturizerConfig | None = None) -> FeatureMatrix:
    """Log mel power spectrogram, ``ln(max(power, floor))``, one row per frame.

    A waveform shorter than one window is zero-padded into a single frame.
    The spectrum is computed in single precision; the log step and the
    returned matrix are double precision.
    """
    config = config or FeaturizerConfig()
    sr = x.sample_rate
    win = config.window_samples(sr)
    hop = config.hop_samples(sr)
    n_fft = config.fft_size(sr)
    if win < 1 or hop < 1 or n_fft < win:
        raise InputError(f"invalid framing: window={win}, hop={hop}, n_fft={n_fft}")
    samples = x.samples
    if samples.size < win:
        samples = np.pad(samples, (0, win - samples.size))
    n_frames = frame_count(samples.size, win, hop)
    frames = np.lib.stride_tricks.sliding_window_view(samples, win)[::hop][:n_frames]
    buf = np.zeros((n_frames, n_fft), dtype=np.float32)
    buf[:, :win] = frames
    buf[:, :win] *= _hann(win)
    spec = scipy.fft.rfft(buf, axis=1)
    power = spec.real**2 + spec.imag**2
    mel = (power @ _filterbank_t(config.n_mels, n_fft, sr)).astype(np.float64)
    return FeatureMatrix(
        np.log(np.maximum(mel, config.log_floor)),
        frame_hop_ms=config.frame_hop_ms,
        frame_len_ms=config.frame_len_ms,
    )
