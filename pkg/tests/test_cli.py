import json
import subprocess
import sys

import numpy as np
import pytest

from sapaug import cli
from sapaug.augment import Waveform
from sapaug.errors import NumericalError, StateError
from sapaug.fileio import parse_feature_csv, parse_sapf, read_features, sapf_bytes, write_wav
from sapaug.policy import KINDS

SMALL = ["--n-train", "16", "--n-val", "8", "--epochs", "1"]


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(0)
    t = np.arange(16000) / 16000
    write_wav(tmp_path / "a.wav", Waveform(0.5 * np.sin(2 * np.pi * 440 * t)))
    write_wav(tmp_path / "b.wav", Waveform(rng.uniform(-0.5, 0.5, 12000)))
    pol = {"policies": {k.value: {"s": 8.0, "a": 0.6, "p": 1.0} for k in KINDS}, "num_masks": 4, "n_cm": 6, "seed": 5}
    (tmp_path / "pol.json").write_text(json.dumps(pol))
    return tmp_path


def test_ibeta(capsys):
    assert run(["ibeta", "--alpha", 1, "--beta", 1, "--x", 0.3], capsys)[:2] == (0, "0.3\n")
    code, out, _ = run(["ibeta", "--alpha", 2, "--beta", 3, "--x", 0.4], capsys)
    assert code == 0 and abs(float(out) - 0.5248) <= 1e-12


def test_policy_curve_linear(capsys, tmp_path):
    code, out, _ = run(["policy-curve", "--s", 2, "--a", 0.5, "--batch", 10], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "l_rank,x,lambda" and len(lines) == 11
    for r, line in enumerate(lines[1:], 1):
        rank, x, lam = line.split(",")
        assert int(rank) == r and float(x) == r / 10
        assert abs(float(lam) - (1 - r / 10)) <= 1e-12
    run(["policy-curve", "--s", 2, "--a", 0.5, "--batch", 10, "--out", tmp_path / "c.csv"], capsys)
    assert (tmp_path / "c.csv").read_text() == out


def test_missing_flag_is_usage_error(capsys):
    code, _, err = run(["ibeta", "--alpha", 1], capsys)
    assert code == 1 and "usage:" in err


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1 and "usage:" in err


def test_no_subcommand(capsys):
    assert run([], capsys)[0] == 1


def test_domain_error_exit_1(capsys):
    code, out, err = run(["ibeta", "--alpha", -1, "--beta", 1, "--x", 0.5], capsys)
    assert code == 1 and out == "" and "alpha" in err


def test_bad_policy_arguments_exit_1(capsys):
    assert run(["policy-curve", "--s", 2, "--a", 1.5, "--batch", 4], capsys)[0] == 1
    assert run(["policy-curve", "--s", 2, "--a", 0.5, "--batch", 0], capsys)[0] == 1


@pytest.mark.parametrize("exc", [NumericalError("boom"), StateError("stuck")])
def test_numerical_and_state_errors_exit_2(capsys, monkeypatch, exc):
    def fail(args):
        raise exc

    monkeypatch.setattr(cli, "cmd_ibeta", fail)
    assert run(["ibeta", "--alpha", 1, "--beta", 1, "--x", 0.5], capsys)[0] == 2


def test_augment_outputs_and_round_trip(files, capsys):
    argv = ["augment", "--in", files / "a.wav", "--pair", files / "b.wav", "--policy", files / "pol.json",
            "--rank", 2, "--batch", 32]
    code, out, _ = run(argv + ["--out-wav", files / "o.wav", "--out-feat", files / "o.sapf"], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["seed"] == 5 and all(summary["applied"].values())
    data = (files / "o.sapf").read_bytes()
    assert sapf_bytes(parse_sapf(data)) == data
    run(argv + ["--out-feat", files / "o.csv"], capsys)
    a, b = read_features(files / "o.sapf"), parse_feature_csv((files / "o.csv").read_text())
    np.testing.assert_allclose(b.frames, a.frames, rtol=1e-6)
    assert (files / "o.wav").read_bytes()[:4] == b"RIFF"


def test_augment_deterministic_under_seed(files, capsys):
    base = ["augment", "--in", files / "a.wav", "--pair", files / "b.wav", "--policy", files / "pol.json",
            "--rank", 1, "--batch", 8]
    run(base + ["--seed", 9, "--out-feat", files / "1.sapf"], capsys)
    run(base + ["--seed", 9, "--out-feat", files / "2.sapf"], capsys)
    run(base + ["--seed", 10, "--out-feat", files / "3.sapf"], capsys)
    assert (files / "1.sapf").read_bytes() == (files / "2.sapf").read_bytes()
    assert (files / "1.sapf").read_bytes() != (files / "3.sapf").read_bytes()


def test_augment_needs_output_and_pair(files, capsys):
    base = ["augment", "--in", files / "a.wav", "--policy", files / "pol.json", "--rank", 1, "--batch", 8]
    assert run(base, capsys)[0] == 1
    assert run(base + ["--out-feat", files / "x.sapf"], capsys)[0] == 1  # pairing selected, no partner
    assert run(base + ["--rank", 9, "--out-feat", files / "x.sapf"], capsys)[0] == 1


@pytest.mark.parametrize("content", ["{", "[]", '{"policies": {"time_mask": {"s": 1, "a": 0.5, "p": 1}}}',
                                     '{"policies": {}, "num_masks": 0}'])
def test_bad_policy_file(files, capsys, content):
    (files / "bad.json").write_text(content)
    code = run(["harness", "--policy", files / "bad.json", *SMALL], capsys)[0]
    assert code == 1


def test_missing_input_file(files, capsys):
    code = run(["augment", "--in", files / "nope.wav", "--policy", files / "pol.json", "--rank", 1,
                "--batch", 2, "--out-feat", files / "o.sapf"], capsys)[0]
    assert code == 1


def test_seed_resolution(monkeypatch):
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    assert cli.resolve_seed(None) == 0
    monkeypatch.setenv(cli.SEED_ENV, "42")
    assert cli.resolve_seed(None) == 42
    assert cli.resolve_seed(None, 7) == 7
    assert cli.resolve_seed("3", 7) == 3
    monkeypatch.setenv(cli.SEED_ENV, "banana")
    with pytest.raises(Exception) as info:
        cli.resolve_seed(None)
    assert "SAPAUG_SEED" in str(info.value)


def test_env_seed_drives_search(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "6")
    run(["search", "--budget", 2, "--n-init", 2, "--log", tmp_path / "a.jsonl", *SMALL], capsys)
    monkeypatch.delenv(cli.SEED_ENV)
    run(["search", "--budget", 2, "--n-init", 2, "--log", tmp_path / "b.jsonl", "--seed", 6, *SMALL], capsys)
    strip = lambda p: [{k: v for k, v in json.loads(l).items() if k != "timestamp"}  # noqa: E731
                       for l in p.read_text().splitlines()]
    assert strip(tmp_path / "a.jsonl") == strip(tmp_path / "b.jsonl")


def test_search_and_harness(tmp_path, capsys):
    code, out, _ = run(["search", "--budget", 3, "--n-init", 2, "--parallel", 2, "--log", tmp_path / "t.jsonl",
                        "--seed", 1, "--best-out", tmp_path / "best.json", *SMALL], capsys)
    assert code == 0
    res = json.loads(out)
    assert set(res) >= {"best_trial", "objective", "policies", "seed"}
    events = [json.loads(l) for l in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert sum(e["event"] == "observe" for e in events) == 3
    code, out, _ = run(["harness", "--policy", tmp_path / "best.json", *SMALL], capsys)
    res = json.loads(out)
    assert code == 0 and 0 <= res["baseline_accuracy"] <= 1 and 0 <= res["policy_accuracy"] <= 1


def test_search_space_must_match(tmp_path, capsys):
    (tmp_path / "s.json").write_text(json.dumps({"dims": [{"name": "x", "low": 0, "high": 1}]}))
    code = run(["search", "--space", tmp_path / "s.json", "--budget", 1, "--log", tmp_path / "t.jsonl"], capsys)[0]
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sapaug", "ibeta", "--alpha", "2", "--beta", "2", "--x", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "0.5\n"
    proc = subprocess.run([sys.executable, "-m", "sapaug", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr
