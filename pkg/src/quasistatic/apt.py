"""First-order adiabatic perturbation theory over a gapped spectrum.

Units: hbar = 1. A model exposes its eigenenergies ``energy(n, lam)`` and
the matrix elements ``force_element(m, n, lam)`` of the generalized force
``F = -dH/dlam`` in a smooth, real gauge, so the geometric phase vanishes
and only the dynamic phase is accumulated.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from scipy import integrate

from .errors import GapCollapseError

PAIR_CUTOFF = 1e-12
DEFAULT_PHASE_STEPS = 4096


@runtime_checkable
class SpectrumModel(Protocol):
    level_count: int

    def energy(self, n: int, lam): ...

    def force_element(self, m: int, n: int, lam): ...


@dataclass(frozen=True)
class PopulationSet:
    """Occupation weights of the initial eigenstates."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("populations must be a non-empty vector")
        if np.any(p < 0):
            raise ValueError("populations must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"populations sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def ground(cls, level_count: int) -> "PopulationSet":
        p = np.zeros(level_count)
        p[0] = 1.0
        return cls(p)

    @classmethod
    def thermal(cls, energies, beta: float) -> "PopulationSet":
        e = np.asarray(energies, dtype=float)
        if np.isinf(beta):
            return cls.ground(len(e))
        w = np.exp(-beta * (e - e.min()))
        return cls(w / w.sum())

    def occupied(self):
        return [n for n, pn in enumerate(self.p) if pn > PAIR_CUTOFF]


def _check_pops(model: SpectrumModel, pops: PopulationSet):
    if len(pops.p) != model.level_count:
        raise ValueError(f"{len(pops.p)} populations for {model.level_count} levels")


def _gap(model, m, n, lam):
    e_m, e_n = model.energy(m, lam), model.energy(n, lam)
    e = e_m - e_n
    scale = np.maximum(np.maximum(np.abs(e_m), np.abs(e_n)), 1.0)
    if np.any(np.abs(e) <= 1e-14 * scale):
        raise GapCollapseError(f"levels {m} and {n} are degenerate at lambda={lam!r}")
    return e


def eos_state_variable(model: SpectrumModel, pops: PopulationSet, lam) -> float:
    """Quasistatic state variable: population-weighted diagonal force."""
    _check_pops(model, pops)
    total = 0.0
    for n in pops.occupied():
        total = total + pops.p[n] * np.real(model.force_element(n, n, lam))
    return total


def _grid_for(sched, t, n_steps):
    n = n_steps or DEFAULT_PHASE_STEPS
    n += n % 2
    return np.linspace(sched.t_i, t, n + 1)


def adiabatic_phase_difference(model: SpectrumModel, sched, m: int, n: int, t, n_steps: int | None = None):
    """Dynamic phase difference ``-int_{t_i}^{t} E_mn(lam(t')) dt'``.

    A scalar ``t`` is integrated with composite Simpson on ``n_steps``
    (rounded up to even) intervals. An array ``t`` must be a uniform grid
    starting at ``t_i``; the cumulative Simpson rule is applied on it
    directly so phases align with RK4 samples.
    """
    if np.ndim(t) == 0:
        if t == sched.t_i:
            return 0.0
        grid = _grid_for(sched, float(t), n_steps)
        e = _gap(model, m, n, sched.value(grid))
        return -float(integrate.simpson(e, x=grid))
    grid = np.asarray(t, dtype=float)
    if grid[0] != sched.t_i:
        raise ValueError("phase grid must start at t_i")
    e = _gap(model, m, n, sched.value(grid))
    if len(grid) < 3:
        return -integrate.cumulative_trapezoid(e, grid, initial=0.0)
    return -integrate.cumulative_simpson(e, x=grid, initial=0.0)


def apt_first_order_coefficient(model: SpectrumModel, sched, m: int, n: int, t, *,
                                phase=None, n_steps: int | None = None):
    """First-order transition amplitude ``C_mn^(1)(t)`` for ``m != n``."""
    if m == n:
        raise ValueError("first-order coefficient needs m != n")
    lam = sched.value(t)
    e = _gap(model, m, n, lam)
    e_i = _gap(model, m, n, sched.lam_i)
    m_now = sched.derivative(t) * model.force_element(m, n, lam) / e
    m_ini = sched.derivative(sched.t_i) * model.force_element(m, n, sched.lam_i) / e_i
    if phase is None:
        phase = adiabatic_phase_difference(model, sched, m, n, t, n_steps)
    return 1j * (m_now / e - np.exp(1j * phase) * m_ini / e_i)


def apt_first_order_state_variable(model: SpectrumModel, pops: PopulationSet, sched, t, *,
                                   n_steps: int | None = None):
    """First-order correction to the state variable.

    Depends on the schedule only through its initial velocity and the
    accumulated phases; it vanishes identically when ``lam_dot(t_i) = 0``.
    """
    _check_pops(model, pops)
    rate_i = sched.derivative(sched.t_i)
    lam = sched.value(t)
    total = np.zeros(np.shape(t))
    for n in pops.occupied():
        for m in range(model.level_count):
            if m == n:
                continue
            f_i = model.force_element(m, n, sched.lam_i)
            if abs(f_i) <= PAIR_CUTOFF:
                continue
            e_i = _gap(model, m, n, sched.lam_i)
            phase = adiabatic_phase_difference(model, sched, m, n, t, n_steps)
            term = f_i * np.exp(1j * phase) * np.conj(model.force_element(m, n, lam)) / e_i**2
            total = total + pops.p[n] * np.imag(term)
    out = 2.0 * rate_i * total
    return float(out) if np.ndim(out) == 0 else out


def adiabaticity_measure(model: SpectrumModel, sched, m: int, n: int, t):
    """Quantitative adiabatic condition ``|lam_dot F_mn| / E_mn^2``."""
    if m == n:
        raise ValueError("adiabaticity measure needs m != n")
    lam = sched.value(t)
    e = _gap(model, m, n, lam)
    return np.abs(sched.derivative(t) * model.force_element(m, n, lam)) / e**2
