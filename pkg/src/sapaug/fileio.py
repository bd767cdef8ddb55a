"""WAV and feature-matrix file formats.

WAV files are RIFF PCM, 16-bit signed little-endian mono; samples map to
floats by dividing by 32768. Feature matrices are stored either as CSV (first
line ``T,F``, then T rows of F values) or as the ``SAPF`` binary layout::

    b"SAPF" | uint32 T | uint32 F | T*F float32, row-major, little-endian
"""
from __future__ import annotations

import io
import os
import struct
import tempfile
import wave
from pathlib import Path

import numpy as np

from .augment import FeatureMatrix, Waveform
from .errors import InputError

SAPF_MAGIC = b"SAPF"
_SAPF_HEADER = struct.Struct("<4sII")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def read_wav(path) -> Waveform:
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise InputError(f"{path}: expected mono, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise InputError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise InputError(f"{path}: not a PCM WAV file ({exc})") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise InputError(f"{path}: no samples")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def wav_bytes(x: Waveform) -> bytes:
    pcm = np.clip(np.round(x.samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(x.sample_rate)
        wf.writeframes(pcm.tobytes())
    return buf.getvalue()


def write_wav(path, x: Waveform) -> None:
    atomic_write_bytes(path, wav_bytes(x))


def sapf_bytes(feat: FeatureMatrix) -> bytes:
    T, F = feat.shape
    return _SAPF_HEADER.pack(SAPF_MAGIC, T, F) + feat.frames.astype("<f4").tobytes()


def parse_sapf(data: bytes) -> FeatureMatrix:
    if len(data) < _SAPF_HEADER.size:
        raise InputError("truncated SAPF header")
    magic, T, F = _SAPF_HEADER.unpack_from(data)
    if magic != SAPF_MAGIC:
        raise InputError(f"bad SAPF magic {magic!r}")
    body = data[_SAPF_HEADER.size :]
    if len(body) != 4 * T * F:
        raise InputError(f"SAPF body holds {len(body)} bytes, expected {4 * T * F}")
    return FeatureMatrix(np.frombuffer(body, dtype="<f4").reshape(T, F).astype(np.float64))


def feature_csv(feat: FeatureMatrix) -> str:
    T, F = feat.shape
    lines = [f"{T},{F}"]
    lines.extend(",".join(format(v, ".9g") for v in row) for row in feat.frames)
    return "\n".join(lines) + "\n"


def parse_feature_csv(text: str) -> FeatureMatrix:
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise InputError("empty feature CSV")
    try:
        T, F = (int(v) for v in rows[0].split(","))
        frames = np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"malformed feature CSV: {exc}") from exc
    if frames.shape != (T, F):
        raise InputError(f"feature CSV header says {T}x{F}, body is {frames.shape}")
    return FeatureMatrix(frames)


def write_features(path, feat: FeatureMatrix) -> None:
    """Write CSV when ``path`` ends in ``.csv``, SAPF binary otherwise."""
    if str(path).lower().endswith(".csv"):
        atomic_write_text(path, feature_csv(feat))
    else:
        atomic_write_bytes(path, sapf_bytes(feat))


def read_features(path) -> FeatureMatrix:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == SAPF_MAGIC:
        return parse_sapf(data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: neither SAPF nor UTF-8 CSV") from exc
    return parse_feature_csv(text)
