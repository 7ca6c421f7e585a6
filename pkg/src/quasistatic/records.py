"""CSV records with a ``#`` metadata header, written atomically.

Floats are written with ``repr`` so re-reading reproduces them exactly.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

COLUMN_LEGEND = {
    "t": "time (units of 1/J or 1/omega_i)",
    "Gamma": "transverse field",
    "mu": "magnetization per spin",
    "mu0": "quasistatic (ground-state) magnetization",
    "mu_ex": "excess magnetization mu - mu0",
    "omega": "oscillator frequency",
    "k": "spring constant m*omega^2 (eos-scan) or pair momentum (transitions)",
    "K": "state variable <q^2>/2",
    "K0": "quasistatic state variable",
    "K_ex": "excess state variable K - K0",
    "Qstar": "Husimi adiabaticity measure",
    "W_ex": "excess work",
    "lambda": "control parameter",
    "dlambda_dt": "control parameter velocity",
    "n": "mode index, ascending momentum",
    "p_numeric": "excitation probability from exact dynamics",
    "p_apt1": "first-order perturbative excitation probability",
    "tau": "process duration",
    "protocol": "protocol flavor",
    "rate_constant": "constant of the defining ODE (empty for LIN and IIE)",
    "final_excess": "excess state variable at t_f",
    "max_abs_excess": "max |excess state variable| over the process",
}


@dataclass
class Record:
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def render(record: Record) -> str:
    buf = io.StringIO()
    meta = {"tool_version": __version__, **record.metadata}
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(record.columns)
    for row in record.rows:
        if len(row) != len(record.columns):
            raise ValueError("row length does not match the columns")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_record(path, record: Record) -> Path:
    for row in record.rows:
        for v in row:
            if isinstance(v, (float, np.floating)) and not np.isfinite(v):
                raise ValueError(f"non-finite value in record for {path}")
    return atomic_write_text(path, render(record))


def read_record(path) -> Record:
    meta, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                meta[key.strip()] = value.strip()
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return Record(rows[0], [[_parse_cell(c) for c in r] for r in rows[1:]], meta)


def write_legend(out_dir, columns) -> Path:
    lines = [f"{c}: {COLUMN_LEGEND[c]}" for c in columns if c in COLUMN_LEGEND]
    extra = sorted(c for c in columns if c not in COLUMN_LEGEND)
    lines += [f"{c}: per-protocol column, see its prefix" for c in extra]
    return atomic_write_text(Path(out_dir) / "columns.txt", "\n".join(lines) + "\n")


def schedule_record(sched, n_points: int = 1001, metadata=None) -> Record:
    t, lam, dlam = sched.sample(n_points)
    return Record(["t", "lambda", "dlambda_dt"], [list(r) for r in zip(t, lam, dlam)],
                  dict(metadata or {}, flavor=sched.flavor))


def write_schedule_csv(path, sched, n_points: int = 1001, metadata=None) -> Path:
    return write_record(path, schedule_record(sched, n_points, metadata))
