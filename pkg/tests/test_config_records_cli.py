from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quasistatic import bench, ising
from quasistatic.cli import main
from quasistatic.config import ExperimentConfig, load_config, parse_config
from quasistatic.errors import ConfigError
from quasistatic.records import Record, read_record, render, write_record

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _run(command, cfg_path, out):
    return main([command, "--config", str(cfg_path), "--out", str(out)])


def _column(path, name):
    rec = read_record(path)
    return np.array([row[rec.columns.index(name)] for row in rec.rows], dtype=float)


# configuration


def test_defaults_fill_process_endpoints():
    cfg = parse_config("system = ising\nprocess = crossing\n")
    assert (cfg.gamma_i, cfg.gamma_f, cfg.tau) == (2.0, 0.2, 50.0)
    assert cfg.protocol == ("LIN", "UQA", "UQ2")
    osc = parse_config("system = oscillator\nprocess = expansion\nprotocol = iie, fqa\n")
    assert osc.protocol == ("IIE", "FQA") and osc.omega_f == 2.0


def test_comments_case_and_auto():
    cfg = parse_config("# header\nsystem = ISING  # trailing\n\nsteps = auto\n")
    assert cfg.system == "ising" and cfg.steps is None


@pytest.mark.parametrize("text", [
    "system = magnet\n",
    "system = oscillator\nprocess = crossing\n",
    "N = 7\n",
    "N = ten\n",
    "tau = -1\n",
    "tau = nan\n",
    "gamma_i = 2\ngamma_f = 2\n",
    "protocol = LIN, IIE\n",
    "protocol = FQA, FQA\n",
    "direction = sideways\n",
    "bogus = 1\n",
    "tau = 1\ntau = 2\n",
    "just a line\n",
    "system = oscillator\nN = 10\n",
    "tau_min = 5\ntau_max = 2\n",
    "steps = 0\n",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_beta_for_chain_gets_ground_state_hint():
    with pytest.raises(ConfigError, match="ground state"):
        parse_config("system = ising\nbeta_i = 2\n")


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_resolved_text_round_trips():
    for path in sorted(CONFIGS.glob("*.cfg")):
        cfg = load_config(path)
        again = parse_config(cfg.to_text())
        assert again == cfg
        assert again.digest() == cfg.digest()


def test_digest_ignores_output_location_only():
    cfg = parse_config("system = ising\n")
    assert replace(cfg, out_dir="elsewhere").digest() == cfg.digest()
    assert replace(cfg, tau=4.0).digest() != cfg.digest()


# records


@given(st.lists(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=3, max_size=3), max_size=20))
def test_record_round_trip_is_exact(rows):
    import tempfile
    rec = Record(["a", "b", "c"], rows, {"kind": "test"})
    with tempfile.TemporaryDirectory() as tmp:
        path = write_record(Path(tmp) / "r.csv", rec)
        back = read_record(path)
    assert back.columns == rec.columns
    assert back.rows == [[float(v) for v in r] for r in rows]
    assert back.metadata["kind"] == "test" and "tool_version" in back.metadata


def test_record_mixed_cells_and_validation(tmp_path):
    rec = Record(["name", "n", "x"], [["FQ2", 3, 0.1], ["LIN", 4, None]])
    back = read_record(write_record(tmp_path / "m.csv", rec))
    assert back.rows == rec.rows
    with pytest.raises(ValueError):
        write_record(tmp_path / "bad.csv", Record(["x"], [[math.inf]]))
    with pytest.raises(ValueError):
        render(Record(["x", "y"], [[1.0]]))
    assert not (tmp_path / "bad.csv").exists()
    assert not list(tmp_path.glob(".*tmp"))


# command line


def test_exit_code_config_error(tmp_path, capsys):
    assert _run("drive", _write(tmp_path, "system = nothing\n"), tmp_path / "o") == 2
    assert "config error" in capsys.readouterr().err
    assert _run("transitions", _write(tmp_path, "system = oscillator\nprocess = expansion\n"), tmp_path / "o") == 2


def test_exit_code_synthesis_failure(tmp_path, capsys):
    # the trap must turn repulsive for such a short fast expansion
    cfg = _write(tmp_path, "system = oscillator\nprocess = expansion\ntau = 0.2\nprotocol = IIE\n")
    assert _run("drive", cfg, tmp_path / "o") == 3
    assert "synthesis" in capsys.readouterr().err


def test_exit_code_integration_failure(tmp_path, capsys):
    cfg = _write(tmp_path, "system = ising\nprocess = paramagnetic\ntau = 20\nprotocol = LIN\nsteps = 40\n")
    assert _run("drive", cfg, tmp_path / "o") == 4
    assert "integration" in capsys.readouterr().err


def test_steps_flag_overrides_and_validates(tmp_path):
    cfg = _write(tmp_path, "system = oscillator\nprocess = expansion\nprotocol = LIN\n")
    assert main(["drive", "--config", str(cfg), "--out", str(tmp_path / "o"), "--steps", "0"]) == 2
    assert main(["drive", "--config", str(cfg), "--out", str(tmp_path / "o"), "--steps", "20000", "--seedless"]) == 0
    assert read_record(tmp_path / "o" / "trajectory_LIN.csv").metadata["steps"] == "20000"


def test_eos_scan_ising(tmp_path):
    cfg = _write(tmp_path, "system = ising\nprocess = paramagnetic\nN = 100\n")
    assert _run("eos-scan", cfg, tmp_path / "o") == 0
    gamma = _column(tmp_path / "o" / "eos.csv", "Gamma")
    mu0 = _column(tmp_path / "o" / "eos.csv", "mu0")
    assert gamma[0] == 3.0
    k = np.pi * (2 * np.arange(1, 51) - 1) / 100
    analytic = np.sum(np.cos(np.arctan2(np.sin(k), 3.0 - np.cos(k)))) / 100
    assert abs(mu0[0] - analytic) <= 1e-6
    assert ising.adiabatic_magnetization(ising.IsingChain(100), 1e6) == pytest.approx(0.5, abs=1e-9)
    assert np.all(np.diff(mu0) < 0)
    assert (tmp_path / "o" / "config.resolved.txt").exists()
    assert "mu0:" in (tmp_path / "o" / "columns.txt").read_text()


def test_eos_scan_oscillator(tmp_path):
    cfg = _write(tmp_path, "system = oscillator\nprocess = expansion\n")
    assert _run("eos-scan", cfg, tmp_path / "o") == 0
    omega = _column(tmp_path / "o" / "eos.csv", "omega")
    k0 = _column(tmp_path / "o" / "eos.csv", "K0")
    np.testing.assert_allclose(k0 * omega, k0[0] * omega[0], rtol=1e-14)


def test_drive_outputs_are_deterministic(tmp_path):
    cfg = _write(tmp_path, "system = ising\nprocess = paramagnetic\nN = 20\nprotocol = LIN, FQ2\n")
    assert _run("drive", cfg, tmp_path / "a") == 0
    assert _run("drive", cfg, tmp_path / "b") == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "trajectory_FQ2.csv" in names and "schedule_FQ2.csv" in names and "drive_summary.csv" in names
    for name in (n for n in names if n.endswith(".csv")):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    t = _column(tmp_path / "a" / "trajectory_FQ2.csv", "t")
    assert np.all(np.diff(t) > 0) and len(t) == 501


def _max_deviation(out):
    rec = read_record(out / "drive_summary.csv")
    return {row[0]: row[3] for row in rec.rows}


def test_drive_paramagnetic_fq2_tracks_eos_best(tmp_path):
    assert _run("drive", CONFIGS / "paramagnetic.cfg", tmp_path) == 0
    dev = _max_deviation(tmp_path)
    assert dev["FQ2"] < dev["FQA"] and dev["FQ2"] < dev["LIN"]


def test_drive_crossing_uq2_tracks_eos_best(tmp_path):
    assert _run("drive", CONFIGS / "crossing.cfg", tmp_path) == 0
    dev = _max_deviation(tmp_path)
    assert dev["UQ2"] < dev["UQA"] and dev["UQ2"] < dev["LIN"]


def test_drive_backward_paramagnetic_fqa_beats_fq2(tmp_path):
    assert _run("drive", CONFIGS / "paramagnetic_backward.cfg", tmp_path) == 0
    dev = _max_deviation(tmp_path)
    assert dev["FQA"] < dev["FQ2"]
    gamma = _column(tmp_path / "trajectory_FQA.csv", "Gamma")
    assert gamma[0] == pytest.approx(1.2) and gamma[-1] == pytest.approx(3.0)


def test_sweep_paramagnetic_upper_half(tmp_path):
    cfg = _write(tmp_path, "system = ising\nprocess = paramagnetic\nprotocol = FQA, FQ2\n"
                           "tau_min = 11\ntau_max = 20\ntau_count = 4\n")
    assert _run("sweep-tau", cfg, tmp_path / "o") == 0
    path = tmp_path / "o" / "sweep_tau.csv"
    assert np.all(np.abs(_column(path, "mu_ex_FQ2")) < np.abs(_column(path, "mu_ex_FQA")))


def test_sweep_oscillator_iie_column_vanishes(tmp_path):
    cfg = _write(tmp_path, "system = oscillator\nprocess = expansion\nprotocol = IIE\n"
                           "tau_min = 1\ntau_max = 20\ntau_count = 20\n")
    assert _run("sweep-tau", cfg, tmp_path / "o") == 0
    path = tmp_path / "o" / "sweep_tau.csv"
    assert np.all(np.abs(_column(path, "K_ex_IIE")) < 1e-8)
    assert np.all(np.abs(_column(path, "W_ex_IIE")) < 1e-8)


def test_sweep_crossing_lin_non_increasing(tmp_path):
    cfg = _write(tmp_path, "system = ising\nprocess = crossing\nprotocol = LIN\n"
                           "tau_min = 10\ntau_max = 20\ntau_count = 2\n")
    assert _run("sweep-tau", cfg, tmp_path / "o") == 0
    mu = np.abs(_column(tmp_path / "o" / "sweep_tau.csv", "mu_ex_LIN"))
    assert mu[1] <= mu[0]


def test_transitions_output(tmp_path):
    cfg = _write(tmp_path, "system = ising\nprocess = crossing\nN = 20\ntau = 10\nprotocol = LIN\n")
    assert _run("transitions", cfg, tmp_path / "o") == 0
    rec = read_record(tmp_path / "o" / "transitions_LIN.csv")
    assert rec.columns == ["n", "k", "p_numeric", "p_apt1"] and len(rec.rows) == 10
    p = rec.as_array()[:, 2]
    assert np.all((p >= -1e-14) & (p <= 1.0))


def test_config_dataclass_direct_use():
    cfg = ExperimentConfig(system="oscillator", process="expansion").resolved()
    assert bench.endpoints(replace(cfg, direction="backward")) == (2.0, 1.0)
    assert bench.oscillator_model(replace(cfg, direction="backward")).omega_i == 2.0
