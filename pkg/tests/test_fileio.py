import struct

import numpy as np
import pytest

from sapaug.augment import FeatureMatrix, Waveform
from sapaug.errors import InputError
from sapaug.fileio import (
    atomic_write_text,
    feature_csv,
    parse_feature_csv,
    parse_sapf,
    read_features,
    read_wav,
    sapf_bytes,
    wav_bytes,
    write_features,
    write_wav,
)


def test_wav_round_trip_is_exact_on_pcm_grid(tmp_path):
    pcm = np.random.default_rng(0).integers(-32768, 32768, 1000)
    x = Waveform(pcm / 32768.0, 16000)
    write_wav(tmp_path / "a.wav", x)
    y = read_wav(tmp_path / "a.wav")
    assert y.sample_rate == 16000
    assert np.array_equal(y.samples, x.samples)


def test_wav_layout():
    data = wav_bytes(Waveform(np.array([0.5, -1.0]), 16000))
    assert data[:4] == b"RIFF" and data[8:12] == b"WAVE"
    assert struct.unpack("<2h", data[-4:]) == (16384, -32768)


def test_read_wav_rejects_garbage(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"not a wav at all")
    with pytest.raises(InputError):
        read_wav(p)


def test_sapf_layout_and_bit_identical_reparse():
    f = FeatureMatrix(np.random.default_rng(1).normal(size=(7, 3)))
    data = sapf_bytes(f)
    assert data[:4] == b"SAPF"
    assert struct.unpack("<II", data[4:12]) == (7, 3)
    assert len(data) == 12 + 4 * 21
    back = parse_sapf(data)
    assert np.array_equal(back.frames, f.frames.astype(np.float32).astype(np.float64))
    assert sapf_bytes(back) == data


def test_csv_round_trip_within_format_precision():
    f = FeatureMatrix(np.random.default_rng(2).normal(size=(5, 4)) * 10)
    text = feature_csv(f)
    assert text.splitlines()[0] == "5,4"
    back = parse_feature_csv(text)
    np.testing.assert_allclose(back.frames, f.frames, rtol=1e-8)
    assert feature_csv(back) == text


def test_csv_exact_for_single_precision_values():
    f = FeatureMatrix(np.random.default_rng(3).normal(size=(4, 4)).astype(np.float32).astype(np.float64))
    # nine significant digits identify every float32 uniquely
    back = parse_feature_csv(feature_csv(f)).frames
    assert np.array_equal(back.astype(np.float32), f.frames.astype(np.float32))


@pytest.mark.parametrize("text", ["", "2,2\n1,2\n", "x,y\n", "1,2\n1,abc\n"])
def test_csv_errors(text):
    with pytest.raises(InputError):
        parse_feature_csv(text)


@pytest.mark.parametrize("data", [b"SAP", b"SAPF" + struct.pack("<II", 2, 2) + b"\0" * 4, b"XXXX" + b"\0" * 8])
def test_sapf_errors(data):
    with pytest.raises(InputError):
        parse_sapf(data)


@pytest.mark.parametrize("name", ["f.csv", "f.sapf", "f.bin"])
def test_write_features_dispatch(tmp_path, name):
    f = FeatureMatrix(np.arange(6.0).reshape(2, 3))
    write_features(tmp_path / name, f)
    assert (tmp_path / name).read_bytes()[:4] == (b"2,3\n" if name.endswith(".csv") else b"SAPF")
    assert np.array_equal(read_features(tmp_path / name).frames, f.frames)


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "out.txt"
    atomic_write_text(p, "one")
    atomic_write_text(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in tmp_path.iterdir()] == ["out.txt"]
