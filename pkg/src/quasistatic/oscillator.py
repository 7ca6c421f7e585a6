"""Parametric harmonic oscillator driven through its frequency ``omega(t)``.

For a Gaussian initial state (thermal or ground) every quantity needed here
follows from two classical solutions of ``Z'' + omega(t)**2 Z = 0``:
``X`` with ``X(t_i) = 0, X'(t_i) = 1`` and ``Y`` with ``Y(t_i) = 1,
Y'(t_i) = 0``. Units: hbar = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError
from .numerics import rk4_integrate
from .protocols import HO_COUPLING, GapChannel, Schedule

STEP_FACTOR = 80
MIN_STEPS = 10_000
MAX_RECORDS = 20_001
WRONSKIAN_TOLERANCE = 1e-6


@dataclass(frozen=True)
class OscillatorModel:
    """Mass, endpoint frequencies and initial inverse temperature (``inf`` = ground state)."""

    m: float = 1.0
    omega_i: float = 1.0
    omega_f: float = 2.0
    beta_i: float = 1.0

    def __post_init__(self):
        if not (self.m > 0 and self.omega_i > 0 and self.omega_f > 0):
            raise ValueError("mass and frequencies must be positive")
        if not self.beta_i > 0:
            raise ValueError("beta_i must be positive (or inf)")

    @property
    def initial_energy(self) -> float:
        """Thermal mean energy ``(omega_i/2) coth(beta_i omega_i / 2)``."""
        if math.isinf(self.beta_i):
            return 0.5 * self.omega_i
        return 0.5 * self.omega_i / math.tanh(0.5 * self.beta_i * self.omega_i)

    def reversed(self) -> "OscillatorModel":
        """The backward process, starting from the adiabatically evolved state.

        Quasistatic evolution preserves the level populations, i.e. the
        product ``beta * omega``.
        """
        return OscillatorModel(self.m, self.omega_f, self.omega_i,
                               self.beta_i * self.omega_i / self.omega_f)


def adiabatic_energy(model: OscillatorModel, omega):
    return np.asarray(omega) / model.omega_i * model.initial_energy


def eos_K(model: OscillatorModel, omega):
    """Quasistatic state variable ``<H>^(0) / (2 m omega**2)``."""
    omega = np.asarray(omega, dtype=float)
    return model.initial_energy / (2.0 * model.m * model.omega_i * omega)


@dataclass(frozen=True)
class ClassicalPair:
    t: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray
    Y: np.ndarray
    Ydot: np.ndarray

    def wronskian(self) -> np.ndarray:
        return self.Xdot * self.Y - self.X * self.Ydot


def default_steps(sched: Schedule) -> int:
    omegas = sched.value(np.linspace(sched.t_i, sched.t_f, 2001))
    return max(MIN_STEPS, int(math.ceil(STEP_FACTOR * sched.tau * float(np.max(np.abs(omegas))))))


def classical_solutions(model: OscillatorModel, sched: Schedule, n_steps: int | None = None, *,
                        max_records: int = MAX_RECORDS) -> ClassicalPair:
    """RK4 integration of both fundamental solutions along ``omega(t)``."""
    n = n_steps or default_steps(sched)
    stride = max(1, math.ceil(n / (max_records - 1)))
    n = stride * math.ceil(n / stride)
    h = sched.tau / n
    w2 = sched.value(sched.t_i + 0.5 * h * np.arange(2 * n + 1)) ** 2
    t_i = sched.t_i

    def rhs(t, y):
        w = w2[int(round(2.0 * (t - t_i) / h))]
        return np.array([y[1], -w * y[0], y[3], -w * y[2]])

    sol = rk4_integrate(rhs, np.array([0.0, 1.0, 1.0, 0.0]), sched.t_i, sched.t_f, n, stride=stride)
    y = sol.y
    pair = ClassicalPair(sol.t, y[:, 0], y[:, 1], y[:, 2], y[:, 3])
    drift = float(np.max(np.abs(pair.wronskian() - 1.0)))
    if drift > WRONSKIAN_TOLERANCE:
        raise IntegrationError(f"Wronskian drift {drift:.3g}; increase the step count above {n}")
    return pair


def state_variable_K(model: OscillatorModel, pair: ClassicalPair, omega=None):
    """Exact ``K(t) = <q**2>/2``; independent of the instantaneous frequency."""
    return (pair.Y**2 + model.omega_i**2 * pair.X**2) * model.initial_energy / (2.0 * model.m * model.omega_i**2)


def qstar(pair: ClassicalPair, omega_i: float, omega):
    """Husimi adiabaticity measure; equals 1 on the adiabatic state."""
    w = np.asarray(omega, dtype=float)
    num = pair.Ydot**2 + w * w * pair.Y**2 + omega_i**2 * (pair.Xdot**2 + w * w * pair.X**2)
    return num / (2.0 * omega_i * w)


def excess_work(model: OscillatorModel, pair: ClassicalPair, omega):
    return (qstar(pair, model.omega_i, omega) - 1.0) * adiabatic_energy(model, omega)


@dataclass(frozen=True)
class OscillatorTrajectory:
    model: OscillatorModel
    pair: ClassicalPair
    omega: np.ndarray
    n_steps: int

    @property
    def t(self):
        return self.pair.t

    @property
    def spring_constant(self):
        return self.model.m * self.omega**2

    def K(self):
        return state_variable_K(self.model, self.pair, self.omega)

    def K0(self):
        return eos_K(self.model, self.omega)

    def K_ex(self):
        return self.K() - self.K0()

    def Qstar(self):
        return qstar(self.pair, self.model.omega_i, self.omega)

    def W_ex(self):
        return excess_work(self.model, self.pair, self.omega)


def drive(model: OscillatorModel, sched: Schedule, n_steps: int | None = None, *,
          max_records: int = MAX_RECORDS) -> OscillatorTrajectory:
    pair = classical_solutions(model, sched, n_steps, max_records=max_records)
    n = n_steps or default_steps(sched)
    return OscillatorTrajectory(model, pair, sched.value(pair.t), n)


@dataclass(frozen=True)
class OscillatorSpectrum:
    """Fock levels in the spring constant ``k = m omega**2``, truncated.

    The generalized force is taken as ``q**2/2`` so the thermal diagonal
    average is the state variable ``K``.
    """

    m: float = 1.0
    level_count: int = 60

    def _omega(self, k):
        return np.sqrt(np.asarray(k, dtype=float) / self.m)

    def energy(self, n, lam):
        return (n + 0.5) * self._omega(lam)

    def force_element(self, a, b, lam):
        lo, hi = min(a, b), max(a, b)
        scale = 1.0 / (4.0 * self.m * self._omega(lam))
        if lo == hi:
            return (2 * lo + 1) * scale
        if hi - lo == 2:
            return math.sqrt((lo + 1) * (lo + 2)) * scale
        return np.zeros(np.shape(lam))


def ho_spectrum_adapter(model: OscillatorModel | None = None) -> GapChannel:
    """Channel ``0 <-> 2`` in the frequency parametrization.

    The gap is ``2 omega``. The force element in ``k`` is
    ``sqrt(2)/(4 m omega)``; converting to ``omega`` multiplies by
    ``dk/domega = 2 m omega``, leaving the constant ``sqrt(2)/2``.
    """
    return GapChannel(lambda w: 2.0 * np.asarray(w, dtype=float),
                      lambda w: np.full(np.shape(w), HO_COUPLING), "FQ")
