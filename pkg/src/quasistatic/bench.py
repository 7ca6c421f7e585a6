"""Experiment runners behind the command-line tool.

Each runner writes CSV files into ``cfg.out_dir`` together with the resolved
configuration and a column legend, and returns the written paths.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import ising, oscillator, protocols
from .config import ExperimentConfig
from .errors import ConfigError
from .records import Record, atomic_write_text, write_legend, write_record, write_schedule_csv

log = logging.getLogger(__name__)

ISING_TRAJECTORY = ["t", "Gamma", "mu", "mu0", "mu_ex"]
OSCILLATOR_TRAJECTORY = ["t", "omega", "K", "K0", "K_ex", "Qstar", "W_ex"]


def endpoints(cfg: ExperimentConfig):
    if cfg.system == "ising":
        a, b = cfg.gamma_i, cfg.gamma_f
    else:
        a, b = cfg.omega_i, cfg.omega_f
    return (b, a) if cfg.direction == "backward" else (a, b)


def oscillator_model(cfg: ExperimentConfig) -> oscillator.OscillatorModel:
    model = oscillator.OscillatorModel(cfg.m, cfg.omega_i, cfg.omega_f, cfg.beta_i)
    return model.reversed() if cfg.direction == "backward" else model


def build_schedule(cfg: ExperimentConfig, flavor: str, tau: float) -> protocols.Schedule:
    lam_i, lam_f = endpoints(cfg)
    if flavor == "LIN":
        return protocols.linear(lam_i, lam_f, 0.0, tau)
    if cfg.system == "ising":
        chain = ising.IsingChain(cfg.N, cfg.J)
        channel = ising.lowest_channel(chain, "FQ" if flavor.startswith("FQ") else "UQ")
        synth = protocols.fqa if flavor.endswith("A") else protocols.fq2
        return synth(channel, lam_i, lam_f, 0.0, tau)
    if flavor == "FQA":
        return protocols.ho_fqa(lam_i, lam_f, 0.0, tau)
    if flavor == "FQ2":
        return protocols.ho_fq2(lam_i, lam_f, 0.0, tau)
    if flavor == "IIE":
        return protocols.iie(cfg.m, lam_i, lam_f, 0.0, tau)
    raise ConfigError(f"unknown protocol {flavor!r}")


def _thin(n: int, points: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n - 1, min(points, n))).astype(int))


def _metadata(cfg: ExperimentConfig, **extra):
    return {"config_sha256": cfg.digest(), "system": cfg.system, "process": cfg.process,
            "direction": cfg.direction, **extra}


def _finish(cfg, out: Path, written, columns):
    out.mkdir(parents=True, exist_ok=True)
    written.append(atomic_write_text(out / "config.resolved.txt", cfg.to_text()))
    written.append(write_legend(out, columns))
    return written


def run_ising(cfg: ExperimentConfig, sched: protocols.Schedule) -> ising.ChainTrajectory:
    chain = ising.IsingChain(cfg.N, cfg.J)
    start = ising.ground_state_amplitudes(chain, sched.lam_i)
    return ising.evolve(start, sched, cfg.steps)


def run_oscillator(cfg: ExperimentConfig, sched: protocols.Schedule) -> oscillator.OscillatorTrajectory:
    return oscillator.drive(oscillator_model(cfg), sched, cfg.steps)


def trajectory_rows(traj):
    if isinstance(traj, ising.ChainTrajectory):
        cols = [traj.t, traj.gamma, traj.magnetization(), traj.adiabatic_magnetization(),
                traj.excess_magnetization()]
    else:
        cols = [traj.t, traj.omega, traj.K(), traj.K0(), traj.K_ex(), traj.Qstar(), traj.W_ex()]
    return np.column_stack(cols)


def final_excess(traj) -> tuple[float, float, float]:
    """(final excess, max |excess|, final excess work or nan)."""
    if isinstance(traj, ising.ChainTrajectory):
        ex = traj.excess_magnetization()
        return float(ex[-1]), float(np.max(np.abs(ex))), float("nan")
    ex = traj.K_ex()
    return float(ex[-1]), float(np.max(np.abs(ex))), float(traj.W_ex()[-1])


def _run(cfg, sched):
    return run_ising(cfg, sched) if cfg.system == "ising" else run_oscillator(cfg, sched)


def cmd_eos_scan(cfg: ExperimentConfig) -> list:
    out = Path(cfg.out_dir)
    lam_i, lam_f = endpoints(cfg)
    lam = np.linspace(lam_i, lam_f, cfg.scan_points)
    if cfg.system == "ising":
        chain = ising.IsingChain(cfg.N, cfg.J)
        columns = ["Gamma", "mu0"]
        data = np.column_stack([lam, ising.adiabatic_magnetization(chain, lam)])
    else:
        model = oscillator_model(cfg)
        columns = ["omega", "k", "K0"]
        data = np.column_stack([lam, cfg.m * lam**2, oscillator.eos_K(model, lam)])
    rec = Record(columns, data.tolist(), _metadata(cfg, kind="eos"))
    written = [write_record(out / "eos.csv", rec)]
    return _finish(cfg, out, written, columns)


def cmd_drive(cfg: ExperimentConfig) -> list:
    out = Path(cfg.out_dir)
    written, summary = [], []
    columns = ISING_TRAJECTORY if cfg.system == "ising" else OSCILLATOR_TRAJECTORY
    for flavor in cfg.protocol:
        sched = build_schedule(cfg, flavor, cfg.tau)
        log.info("drive %s tau=%g", flavor, cfg.tau)
        traj = _run(cfg, sched)
        rows = trajectory_rows(traj)[_thin(len(traj.t), cfg.output_points)]
        meta = _metadata(cfg, kind="trajectory", protocol=flavor, tau=repr(cfg.tau), steps=traj.n_steps)
        written.append(write_record(out / f"trajectory_{flavor}.csv", Record(columns, rows.tolist(), meta)))
        written.append(write_schedule_csv(out / f"schedule_{flavor}.csv", sched, cfg.output_points,
                                          _metadata(cfg, kind="schedule", protocol=flavor)))
        fin, worst, _ = final_excess(traj)
        summary.append([flavor, sched.rate_constant, fin, worst])
    sum_cols = ["protocol", "rate_constant", "final_excess", "max_abs_excess"]
    written.append(write_record(out / "drive_summary.csv",
                                Record(sum_cols, summary, _metadata(cfg, kind="summary", tau=repr(cfg.tau)))))
    return _finish(cfg, out, written, columns + sum_cols + ["lambda", "dlambda_dt"])


def cmd_sweep_tau(cfg: ExperimentConfig) -> list:
    out = Path(cfg.out_dir)
    taus = np.linspace(cfg.tau_min, cfg.tau_max, cfg.tau_count)
    columns = ["tau"]
    for flavor in cfg.protocol:
        columns += [f"mu_ex_{flavor}"] if cfg.system == "ising" else [f"K_ex_{flavor}", f"W_ex_{flavor}"]
    rows = []
    for tau in taus:
        row = [float(tau)]
        for flavor in cfg.protocol:
            log.info("sweep %s tau=%g", flavor, tau)
            fin, _, work = final_excess(_run(cfg, build_schedule(cfg, flavor, float(tau))))
            row += [fin] if cfg.system == "ising" else [fin, work]
        rows.append(row)
    written = [write_record(out / "sweep_tau.csv", Record(columns, rows, _metadata(cfg, kind="sweep")))]
    return _finish(cfg, out, written, columns)


def cmd_transitions(cfg: ExperimentConfig) -> list:
    if cfg.system != "ising":
        raise ConfigError("transitions are defined for the ising system only")
    out = Path(cfg.out_dir)
    chain = ising.IsingChain(cfg.N, cfg.J)
    columns = ["n", "k", "p_numeric", "p_apt1"]
    written = []
    for flavor in cfg.protocol:
        sched = build_schedule(cfg, flavor, cfg.tau)
        traj = run_ising(cfg, sched)
        p_num = ising.transition_probabilities(traj.final, chain, sched.lam_f)
        p_apt = ising.apt_transition_probabilities(chain, sched)
        rows = [[n, float(k), float(a), float(b)] for n, (k, a, b) in enumerate(zip(chain.k, p_num, p_apt))]
        meta = _metadata(cfg, kind="transitions", protocol=flavor, tau=repr(cfg.tau))
        written.append(write_record(out / f"transitions_{flavor}.csv", Record(columns, rows, meta)))
    return _finish(cfg, out, written, columns)


COMMANDS = {
    "eos-scan": cmd_eos_scan,
    "drive": cmd_drive,
    "sweep-tau": cmd_sweep_tau,
    "transitions": cmd_transitions,
}
