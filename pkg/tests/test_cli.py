import json
import math
import os

import numpy as np
import pytest

from ioncavity import cli
from ioncavity.analysis import TimeTagSet
from ioncavity.fileio import (read_counts, read_timetags, write_counts,
                              write_timetags)
from ioncavity.tomography import simulate_counts, target_state


def run(args, cwd, monkeypatch):
    monkeypatch.chdir(cwd)
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    return cli.main(args)


def test_bounds_defaults(tmp_path, monkeypatch):
    code = run(["bounds", "-o", "out.json"], tmp_path, monkeypatch)
    assert code == 0
    data = json.loads((tmp_path / "out.json").read_text())
    assert data["p_bound"] == pytest.approx(0.73, abs=0.005)
    manifest = json.loads((tmp_path / "out.json.manifest.json").read_text())
    assert manifest["outputs"] == ["out.json"]
    assert manifest["command"] == "bounds"
    assert len(manifest["config_hash"]) == 64


def test_sweep_shape(tmp_path, monkeypatch):
    code = run(["sweep-t2", "--min-ppm", "10", "--max-ppm", "1000",
                "--points", "200", "-o", "sw.csv"], tmp_path, monkeypatch)
    assert code == 0
    lines = (tmp_path / "sw.csv").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "x,p_bound,p_pure,p_in,p_esc,pure_fraction"
    assert len(lines) == 202  # comment + header + 200 rows


def test_unknown_command_usage_exit():
    assert cli.main(["frobnicate"]) == 2


def test_invalid_config_validation_exit(tmp_path, monkeypatch):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"cavity": {"t2_ppm": -1}}))
    code = run(["--config", str(bad), "bounds"], tmp_path, monkeypatch)
    assert code == 3


def test_missing_input_validation_exit(tmp_path, monkeypatch):
    code = run(["train", "--timetags", "nope.csv"], tmp_path, monkeypatch)
    assert code == 3


def test_byte_identical_reruns(tmp_path, monkeypatch):
    rng = np.random.default_rng(4)
    rho = 0.9 * np.outer(target_state(0.5), target_state(0.5).conj()) \
        + 0.1 * np.eye(4) / 4
    write_counts(tmp_path / "counts.csv", simulate_counts(rho, 900, rng=rng))
    args = ["tomo", "--counts", "counts.csv", "--resamples", "25",
            "-o", "tomo.json"]
    assert run(args, tmp_path, monkeypatch) == 0
    first = (tmp_path / "tomo.json").read_bytes()
    first_manifest = (tmp_path / "tomo.json.manifest.json").read_bytes()
    assert run(args, tmp_path, monkeypatch) == 0
    assert (tmp_path / "tomo.json").read_bytes() == first
    assert (tmp_path / "tomo.json.manifest.json").read_bytes() == first_manifest


def test_worker_count_does_not_change_result(tmp_path, monkeypatch):
    rng = np.random.default_rng(9)
    rho = np.outer(target_state(1.0), target_state(1.0).conj())
    write_counts(tmp_path / "c.csv",
                 simulate_counts(0.92 * rho + 0.02 * np.eye(4), 800, rng=rng))
    args = ["tomo", "--counts", "c.csv", "--resamples", "20", "-o", "t.json"]
    assert run(args, tmp_path, monkeypatch) == 0
    serial = (tmp_path / "t.json").read_bytes()
    monkeypatch.setenv("CPK_THREADS", "4")
    assert run(args, tmp_path, monkeypatch) == 0
    assert (tmp_path / "t.json").read_bytes() == serial


def test_timetag_round_trip(tmp_path):
    tags = TimeTagSet(attempts=100, times=np.array([1.5, 7.25]),
                      attempt_index=np.array([3, 99]), span=(0.0, 10.0))
    write_timetags(tmp_path / "tags.csv", tags)
    back = read_timetags(tmp_path / "tags.csv")
    assert back.attempts == 100
    assert np.allclose(back.times, tags.times)
    assert back.span == (0.0, 10.0)


def test_counts_round_trip(tmp_path):
    rho = np.outer(target_state(0.3), target_state(0.3).conj())
    table = simulate_counts(rho, 1000)
    write_counts(tmp_path / "c.csv", table)
    back = read_counts(tmp_path / "c.csv")
    assert np.allclose(back.counts, table.counts)


def test_counts_missing_rows_rejected(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("photon_basis,ion_basis,outcome,counts\nZ,Z,0,5\n")
    with pytest.raises(ValueError):
        read_counts(path)


def test_wavepacket_command(tmp_path, monkeypatch):
    rng = np.random.default_rng(2)
    times = rng.exponential(20.0, 900)
    times = times[times < 199.0]
    tags = TimeTagSet(attempts=2000, times=times,
                      attempt_index=rng.integers(0, 2000, times.size),
                      span=(0.0, 200.0))
    write_timetags(tmp_path / "tags.csv", tags)
    code = run(["wavepacket", "--timetags", "tags.csv", "--bin-us", "2.0",
                "-o", "wp.csv"], tmp_path, monkeypatch)
    assert code == 0
    lines = (tmp_path / "wp.csv").read_text().splitlines()
    assert lines[1] == "t_us,p_d_per_us,p_d_err"
    dens = [float(l.split(",")[1]) for l in lines[2:]]
    total = sum(dens) * 2.0
    assert total == pytest.approx(times.size / 2000, rel=1e-9)


def test_train_command(tmp_path, monkeypatch):
    rng = np.random.default_rng(6)
    windows = [(i * 260.0, i * 260.0 + 200.0) for i in range(15)]
    tt, ai = [], []
    for a in range(4000):
        for lo, hi in windows:
            if rng.random() < 0.5:
                tt.append(rng.uniform(lo, hi))
                ai.append(a)
    tags = TimeTagSet(attempts=4000, times=np.array(tt),
                      attempt_index=np.array(ai), span=(0.0, 15 * 260.0))
    write_timetags(tmp_path / "train.csv", tags)
    code = run(["train", "--timetags", "train.csv", "-o", "train.json"],
               tmp_path, monkeypatch)
    assert code == 0
    data = json.loads((tmp_path / "train.json").read_text())
    assert len(data["p_slot"]) == 15
    assert len(data["p_consec"]) == 15
    assert data["fit_p"] == pytest.approx(0.5, abs=0.01)
    assert data["geometric_ok"]


def test_simulate_command_short(tmp_path, monkeypatch):
    code = run(["simulate", "--rabi-mhz", "46", "--duration-us", "60",
                "--bin-us", "1.0", "-o", "sim.csv"], tmp_path, monkeypatch)
    assert code == 0
    lines = (tmp_path / "sim.csv").read_text().splitlines()
    assert lines[1] == "t_us,flux_H_per_s,flux_V_per_s,cum_P_S"
    last = lines[-1].split(",")
    assert float(last[0]) == pytest.approx(60.0, abs=1e-9)
    assert 0.3 < float(last[3]) < 0.75
