"""Driving protocols.

A :class:`Schedule` carries ``lam(t)`` and ``lam_dot(t)`` on ``[t_i, t_f]``.
Protocols are synthesized either generically from a :class:`GapChannel`
(one gap ``E(lam)`` and a non-negative coupling) or from the closed forms
available for the Ising chain and the harmonic oscillator.

Flavors:

``LIN``
    constant velocity.
``FQA`` / ``UQA``
    ``|lam_dot * coupling / gap**2| = c1``; coupling is ``|F_mn|`` for FQA
    and ``|dE/dlam|`` for UQA.
``FQ2`` / ``UQ2``
    ``|d/dt(lam_dot * coupling / gap**2)| / gap = c2`` with
    ``lam_dot(t_i) = 0``.
``IIE``
    invariant-based inverse engineering for the parametric oscillator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import IntegrationError, SynthesisError
from .numerics import erf, erfi, inv_erf, inv_erfi, invert_monotone, rk4_integrate, shoot_scalar

DEFAULT_SAMPLES = 10_000
SHOOTING_STEPS = 2_000


@dataclass(frozen=True)
class Schedule:
    """A protocol ``lam(t)`` between ``(t_i, lam_i)`` and ``(t_f, lam_f)``."""

    t_i: float
    t_f: float
    lam_i: float
    lam_f: float
    value_fn: Callable = field(repr=False)
    derivative_fn: Callable = field(repr=False)
    flavor: str = "custom"
    rate_constant: float | None = None
    # interior times where lam_dot is discontinuous or singular
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.t_f > self.t_i:
            raise ValueError("schedule needs t_f > t_i")

    @property
    def tau(self) -> float:
        return self.t_f - self.t_i

    def value(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(self.value_fn(arr), dtype=float)
        return float(out) if arr.ndim == 0 else out

    def derivative(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(self.derivative_fn(arr), dtype=float)
        return float(out) if arr.ndim == 0 else out

    def sample(self, n_points: int = 1001):
        t = np.linspace(self.t_i, self.t_f, n_points)
        return t, self.value(t), self.derivative(t)


def constant(lam: float, t_i: float, t_f: float) -> Schedule:
    """Frozen parameter; handy for stationary checks and sudden quenches."""
    return Schedule(t_i, t_f, lam, lam,
                    lambda t: np.full(np.shape(t), float(lam)),
                    lambda t: np.zeros(np.shape(t)), flavor="CONST")


def linear(lam_i: float, lam_f: float, t_i: float, t_f: float) -> Schedule:
    _check_times(t_i, t_f)
    tau = t_f - t_i
    rate = (lam_f - lam_i) / tau
    return Schedule(t_i, t_f, lam_i, lam_f,
                    lambda t: lam_i + rate * (t - t_i),
                    lambda t: np.full(np.shape(t), rate),
                    flavor="LIN")


@dataclass(frozen=True)
class GapChannel:
    """One energy gap ``gap(lam)`` and the coupling entering the FQA-type ODEs.

    All callables must accept numpy arrays.
    """

    gap: Callable
    coupling: Callable
    flavor: str = "FQ"
    gap_slope: Callable | None = None

    @classmethod
    def from_force(cls, gap, force_element) -> "GapChannel":
        return cls(gap, lambda lam: np.abs(force_element(lam)), "FQ")

    @classmethod
    def from_gap(cls, gap, gap_slope) -> "GapChannel":
        """Gap-derivative substitution ``F_mn -> dE_mn/dlam``."""
        return cls(gap, lambda lam: np.abs(gap_slope(lam)), "UQ", gap_slope)

    def integrand(self, lam):
        e = self.gap(lam)
        return self.coupling(lam) / (e * e)

    def crossing(self, lo: float, hi: float):
        """Interior gap minimum where a gap-derivative coupling vanishes."""
        if self.gap_slope is None:
            return None
        s_lo, s_hi = self.gap_slope(np.float64(lo)), self.gap_slope(np.float64(hi))
        if s_lo < 0 < s_hi:
            return shoot_scalar(lambda x: float(self.gap_slope(np.float64(x))), (lo, hi))
        return None


class _Antiderivative:
    """Cumulative Gauss-Legendre integral of ``f`` on a fixed cell grid."""

    def __init__(self, f, nodes, cells: int = 2048, order: int = 12):
        nodes = sorted(set(float(x) for x in nodes))
        span = nodes[-1] - nodes[0]
        edges = [np.array([nodes[0]])]
        for a, b in zip(nodes[:-1], nodes[1:]):
            k = max(8, int(math.ceil(cells * (b - a) / span)))
            edges.append(np.linspace(a, b, k + 1)[1:])
        self.f = f
        self.edges = np.concatenate(edges)
        self.x_gl, self.w_gl = np.polynomial.legendre.leggauss(order)
        with np.errstate(divide="ignore", invalid="ignore"):
            at_edges = f(self.edges)
        if not np.all(np.isfinite(at_edges)):
            raise SynthesisError("coupling/gap**2 is singular inside the protocol range")
        a, b = self.edges[:-1], self.edges[1:]
        cell = self._quad(a, b)
        self.cum = np.concatenate([[0.0], np.cumsum(cell)])

    def _quad(self, a, b):
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[..., None] + half[..., None] * self.x_gl
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = self.f(x)
        if not np.all(np.isfinite(vals)):
            raise SynthesisError("coupling/gap**2 is singular inside the protocol range")
        if np.any(vals < 0):
            raise SynthesisError("channel integrand must be non-negative")
        return half * (vals @ self.w_gl)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, lam, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[idx]
        return self.cum[idx] + self._quad(a, lam)


def _check_times(t_i, t_f):
    if not t_f > t_i:
        raise ValueError("t_f must exceed t_i")


def fqa(channel: GapChannel, lam_i: float, lam_f: float, t_i: float, t_f: float, *,
        cells: int = 2048) -> Schedule:
    """Constant first-order transition measure, by quadrature inversion.

    ``G(lam) = int coupling/gap**2 dlam`` is tabulated once; the protocol is
    ``G^{-1}`` of a linear ramp in ``G``, so ``c1 = |G_f - G_i| / tau``
    exactly. A gap-derivative channel may pass through its gap minimum.
    """
    _check_times(t_i, t_f)
    if lam_i == lam_f:
        raise SynthesisError("endpoints coincide")
    tau = t_f - t_i
    lo, hi = min(lam_i, lam_f), max(lam_i, lam_f)
    lam_c = channel.crossing(lo, hi)
    anti = _Antiderivative(channel.integrand, [lo, hi] + ([lam_c] if lam_c is not None else []), cells)
    g_i, g_f = float(anti(lam_i)), float(anti(lam_f))
    rate = (g_f - g_i) / tau

    def value(t):
        s = np.clip((t - t_i) / tau, 0.0, 1.0)
        lam = invert_monotone(anti, g_i + (g_f - g_i) * s, (lo, hi), dg=channel.integrand)
        lam = np.where(s == 0.0, lam_i, np.where(s == 1.0, lam_f, lam))
        return lam

    def derivative(t):
        with np.errstate(divide="ignore"):
            return rate / channel.integrand(value(t))

    flavor = "FQA" if channel.flavor == "FQ" else "UQA"
    breaks = ()
    if lam_c is not None:
        t_c = t_i + tau * (float(anti(lam_c)) - g_i) / (g_f - g_i)
        breaks = (t_c,)
    return Schedule(t_i, t_f, lam_i, lam_f, value, derivative, flavor, abs(rate), breaks)


@dataclass(frozen=True)
class _Branch:
    sigma_f: float
    sigma: np.ndarray
    lam: np.ndarray
    lam_prime: np.ndarray


def _fq2_branch(channel: GapChannel, lam_start: float, lam_end: float, n_steps: int) -> _Branch:
    """Second-order branch with unit constant in the scaled time ``sigma``.

    Integrates ``lam' = q E**2 / coupling``, ``q' = sign * E`` from rest. The
    real-time solution for constant ``c2`` is this one evaluated at
    ``sigma = sqrt(c2) (t - t_i)``, so shooting on the scaled duration fixes
    ``c2 = (sigma_f / tau)**2``.
    """
    sign = 1.0 if lam_end > lam_start else -1.0
    lo, hi = min(lam_start, lam_end), max(lam_start, lam_end)

    def rhs(_, y):
        e = channel.gap(y[0])
        return np.array([y[1] * e * e / channel.coupling(y[0]), sign * e])

    g_tot = float(np.diff(_Antiderivative(channel.integrand, [lo, hi])(np.array([lo, hi])))[0])
    e_min = float(np.min(channel.gap(np.linspace(lo, hi, 513))))
    if not (g_tot > 0 and e_min > 0):
        raise SynthesisError("degenerate channel on the protocol range")
    # |G|'' = E >= E_min while inside the range, so this scaled time overshoots.
    sigma_hi = 1.05 * math.sqrt(2.0 * g_tot / e_min)
    y0 = np.array([lam_start, 0.0])

    def passed(_, y):
        return sign * (y[0] - lam_end) >= 0

    try:
        march = rk4_integrate(rhs, y0, 0.0, sigma_hi, 4000, stop=passed)
    except IntegrationError as exc:
        raise SynthesisError(f"FQ2 march failed: {exc}") from exc
    if not passed(None, march.y[-1]):
        raise SynthesisError("FQ2 branch did not reach the target parameter")
    j = len(march.t) - 1
    a, b = march.t[j - 1], march.t[j]

    def residual_with(n):
        def residual(sigma):
            try:
                end = rk4_integrate(rhs, y0, 0.0, sigma, n).y[-1][0]
            except IntegrationError:
                return abs(hi - lo) * 1e6
            return sign * (end - lam_end)
        return residual

    # A coarse shot is usually converged already; refine at full resolution if not.
    coarse = residual_with(min(n_steps, SHOOTING_STEPS))
    for _ in range(20):
        if coarse(a) < 0 < coarse(b):
            break
        a, b = 0.9 * a, 1.1 * b
    else:
        raise SynthesisError("could not bracket the FQ2 duration")
    sigma_f = shoot_scalar(coarse, (a, b))
    tol = 1e-10 * (hi - lo)
    sol = rk4_integrate(rhs, y0, 0.0, sigma_f, n_steps)
    if abs(sol.y[-1][0] - lam_end) > tol:
        fine = residual_with(n_steps)
        width = 1e-6 * sigma_f
        while not fine(sigma_f - width) < 0 < fine(sigma_f + width):
            width *= 10.0
            if width > 0.5 * sigma_f:
                raise SynthesisError("could not refine the FQ2 duration")
        sigma_f = shoot_scalar(fine, (sigma_f - width, sigma_f + width))
        sol = rk4_integrate(rhs, y0, 0.0, sigma_f, n_steps)
    lam = sol.y[:, 0].copy()
    if abs(lam[-1] - lam_end) > 1e3 * tol:
        raise SynthesisError("FQ2 shooting did not converge to the target")
    lam[-1] = lam_end
    e = channel.gap(lam)
    lam_prime = sol.y[:, 1] * e * e / channel.coupling(lam)
    if np.any(sign * np.diff(lam) < 0):
        raise SynthesisError("FQ2 solution is not monotone")
    return _Branch(sigma_f, sol.t, lam, lam_prime)


def fq2(channel: GapChannel, lam_i: float, lam_f: float, t_i: float, t_f: float, *,
        n_steps: int = DEFAULT_SAMPLES) -> Schedule:
    """Constant second-order transition measure with ``lam_dot(t_i) = 0``.

    The sign of ``d/dt(lam_dot * coupling / gap**2)`` is held equal to
    ``sign(lam_f - lam_i)``. For a gap-derivative channel whose gap has an
    interior minimum the protocol is built from two branches that meet at
    the minimum with a common ``c2``; the second branch also starts from rest
    at ``t_f``.
    """
    _check_times(t_i, t_f)
    if lam_i == lam_f:
        raise SynthesisError("endpoints coincide")
    tau = t_f - t_i
    lo, hi = min(lam_i, lam_f), max(lam_i, lam_f)
    lam_c = channel.crossing(lo, hi)
    flavor = "FQ2" if channel.flavor == "FQ" else "UQ2"
    if lam_c is not None:
        return _two_branch(channel, lam_i, lam_f, lam_c, t_i, t_f, n_steps)
    probe = np.linspace(lo, hi, 4097)[1:-1]
    if np.any(channel.coupling(probe) <= 0):
        raise SynthesisError("coupling vanishes inside the range; second-order synthesis is undefined there")

    br = _fq2_branch(channel, lam_i, lam_f, n_steps)
    speed = br.sigma_f / tau
    t = t_i + br.sigma / speed
    t[-1] = t_f
    spline = CubicHermiteSpline(t, br.lam, speed * br.lam_prime)

    def value(x):
        return spline(np.clip(x, t_i, t_f))

    def derivative(x):
        return spline(np.clip(x, t_i, t_f), 1)

    return Schedule(t_i, t_f, lam_i, lam_f, value, derivative, flavor, speed**2)


def _two_branch(channel, lam_i, lam_f, lam_c, t_i, t_f, n_steps) -> Schedule:
    # In x = 1/gap the gap-derivative ODE is |x x''| = c2, independent of the model.
    reduced = GapChannel(lambda x: 1.0 / x, lambda x: 1.0 / (x * x), "FQ")
    x_i, x_c, x_f = (1.0 / float(channel.gap(np.float64(v))) for v in (lam_i, lam_c, lam_f))
    first = _fq2_branch(reduced, x_i, x_c, n_steps)
    second = _fq2_branch(reduced, x_f, x_c, n_steps)
    tau = t_f - t_i
    speed = (first.sigma_f + second.sigma_f) / tau
    t_c = t_i + first.sigma_f / speed
    h1 = CubicHermiteSpline(first.sigma, first.lam, first.lam_prime)
    h2 = CubicHermiteSpline(second.sigma, second.lam, second.lam_prime)
    side_i = (min(lam_i, lam_c), max(lam_i, lam_c))
    side_f = (min(lam_f, lam_c), max(lam_f, lam_c))

    def x_and_rate(t):
        t = np.clip(t, t_i, t_f)
        before = t <= t_c
        s1 = np.clip(speed * (t - t_i), 0.0, first.sigma_f)
        s2 = np.clip(speed * (t_f - t), 0.0, second.sigma_f)
        x = np.where(before, h1(s1), h2(s2))
        xdot = np.where(before, speed * h1(s1, 1), -speed * h2(s2, 1))
        return before, np.minimum(x, x_c), xdot

    def value(t):
        before, x, _ = x_and_rate(t)
        gap_target = 1.0 / np.atleast_1d(x)
        b = np.atleast_1d(before)
        lam = np.empty_like(gap_target)
        if np.any(b):
            lam[b] = invert_monotone(channel.gap, gap_target[b], side_i, dg=channel.gap_slope)
        if np.any(~b):
            lam[~b] = invert_monotone(channel.gap, gap_target[~b], side_f, dg=channel.gap_slope)
        s = (np.atleast_1d(t) - t_i) / tau
        lam = np.where(s <= 0, lam_i, np.where(s >= 1, lam_f, lam))
        return lam.reshape(np.shape(t))

    def derivative(t):
        _, x, xdot = x_and_rate(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -xdot / (x * x * channel.gap_slope(value(t)))

    return Schedule(t_i, t_f, lam_i, lam_f, value, derivative, "UQ2", speed**2, (t_c,))


# ---------------------------------------------------------------------------
# closed forms: transverse-field Ising chain, lowest pair mode k0 = pi/N


def _ti_mode(N, J, gamma):
    k0 = math.pi / N
    a = gamma - J * math.cos(k0)
    b = J * math.sin(k0)
    eps = np.hypot(a, b)
    return k0, eps, b / eps, a / eps  # sin(theta), cos(theta)


def _gamma_from_sin(N, J, S, branch):
    # Gamma - J cos k0 = +/- J sin k0 * cot(theta), cot from sin(theta) in (0, 1]
    k0 = math.pi / N
    S = np.minimum(S, 1.0)
    cot = np.sqrt((1.0 - S) * (1.0 + S)) / S
    return J * math.cos(k0) + branch * J * math.sin(k0) * cot


def _dgamma_dsin(N, J, S, branch):
    k0 = math.pi / N
    S = np.minimum(S, 1.0)
    with np.errstate(divide="ignore"):
        return -branch * J * math.sin(k0) / (S * S * np.sqrt((1.0 - S) * (1.0 + S)))


def ti_fqa(N: int, J: float, gamma_i: float, gamma_f: float, t_i: float, t_f: float) -> Schedule:
    """FQA on the lowest Ising gap: ``cos(theta_k0)`` is linear in time."""
    _check_times(t_i, t_f)
    if min(gamma_i, gamma_f) <= J:
        raise ValueError("ti_fqa is restricted to the paramagnetic range Gamma > J")
    k0 = math.pi / N
    tau = t_f - t_i
    _, eps_i, _, c_i = _ti_mode(N, J, gamma_i)
    _, eps_f, _, c_f = _ti_mode(N, J, gamma_f)
    rate = (c_f - c_i) / tau

    def alpha(t):
        return c_i + (c_f - c_i) * np.clip((t - t_i) / tau, 0.0, 1.0)

    def value(t):
        a = alpha(t)
        return J * math.cos(k0) + J * math.sin(k0) * a / np.sqrt(1.0 - a * a)

    def derivative(t):
        a = alpha(t)
        return J * math.sin(k0) * (1.0 - a * a) ** -1.5 * rate

    c1 = abs(c_f - c_i) / (4.0 * J * math.sin(k0) * tau)
    return Schedule(t_i, t_f, gamma_i, gamma_f, value, derivative, "FQA", c1)


def _check_crossing(N, J, gamma_i, gamma_f):
    if not (gamma_i > J and gamma_f < J * math.cos(math.pi / N)):
        raise ValueError("closed-form UQA/UQ2 need Gamma_f < J cos(pi/N) < J < Gamma_i")


def ti_uqa(N: int, J: float, gamma_i: float, gamma_f: float, t_i: float, t_f: float) -> Schedule:
    """UQA on the lowest Ising gap: ``sin(theta_k0)`` piecewise linear in time."""
    _check_times(t_i, t_f)
    _check_crossing(N, J, gamma_i, gamma_f)
    k0 = math.pi / N
    _, eps_i, s_i, _ = _ti_mode(N, J, gamma_i)
    _, eps_f, s_f, _ = _ti_mode(N, J, gamma_f)
    w_i, w_f = 1.0 / (1.0 - s_i), 1.0 / (1.0 - s_f)
    t1 = (w_i * t_i + w_f * t_f) / (w_i + w_f)
    rate_1 = (1.0 - s_i) / (t1 - t_i)
    rate_2 = -(1.0 - s_f) / (t_f - t1)

    def sin_theta(t):
        t = np.clip(t, t_i, t_f)
        return np.where(t <= t1, s_i + rate_1 * (t - t_i), s_f + rate_2 * (t - t_f))

    def value(t):
        branch = np.where(np.asarray(t) <= t1, 1.0, -1.0)
        return _gamma_from_sin(N, J, sin_theta(t), branch)

    def derivative(t):
        t = np.asarray(t)
        branch = np.where(t <= t1, 1.0, -1.0)
        rate = np.where(t <= t1, rate_1, rate_2)
        return _dgamma_dsin(N, J, sin_theta(t), branch) * rate

    # G = 1/E along the channel, E = 2 eps
    x_c = 1.0 / (2.0 * J * math.sin(k0))
    c1 = (2.0 * x_c - 1.0 / (2 * eps_i) - 1.0 / (2 * eps_f)) / (t_f - t_i)
    return Schedule(t_i, t_f, gamma_i, gamma_f, value, derivative, "UQA", c1, (t1,))


def ti_uq2(N: int, J: float, gamma_i: float, gamma_f: float, t_i: float, t_f: float) -> Schedule:
    """UQ2 on the lowest Ising gap.

    Each branch starts from rest at its outer end:
    ``sin(theta) = sin(theta_end) * exp(z**2)`` with ``z`` the inverse
    ``erfi`` of a linear ramp, which is the real form of the ``erf`` of an
    imaginary argument.
    """
    _check_times(t_i, t_f)
    _check_crossing(N, J, gamma_i, gamma_f)
    k0 = math.pi / N
    _, eps_i, s_i, _ = _ti_mode(N, J, gamma_i)
    _, eps_f, s_f, _ = _ti_mode(N, J, gamma_f)
    a_i, a_f = math.sqrt(math.log(1.0 / s_i)), math.sqrt(math.log(1.0 / s_f))
    ea_i, ea_f = float(erfi(a_i)), float(erfi(a_f))
    w_i, w_f = eps_i / ea_i, eps_f / ea_f
    t2 = (w_i * t_i + w_f * t_f) / (w_i + w_f)
    sqrt_pi = math.sqrt(math.pi)

    def parts(t):
        t = np.clip(np.asarray(t, dtype=float), t_i, t_f)
        before = t <= t2
        r = np.where(before, (t - t_i) / (t2 - t_i), (t_f - t) / (t_f - t2))
        ea = np.where(before, ea_i, ea_f)
        z = np.asarray(inv_erfi(np.clip(r, 0.0, 1.0) * ea))
        S = np.where(before, s_i, s_f) * np.exp(z * z)
        # dz/dt from d erfi(z) = 2/sqrt(pi) exp(z^2) dz
        dz = np.where(before, ea / (t2 - t_i), -ea / (t_f - t2)) * sqrt_pi / 2.0 * np.exp(-z * z)
        return before, S, 2.0 * z * S * dz

    def value(t):
        before, S, _ = parts(t)
        return _gamma_from_sin(N, J, S, np.where(before, 1.0, -1.0))

    def derivative(t):
        before, S, dS = parts(t)
        branch = np.where(before, 1.0, -1.0)
        with np.errstate(invalid="ignore"):
            out = _dgamma_dsin(N, J, S, branch) * dS
        return np.where(dS == 0.0, 0.0, out)

    x_i = 1.0 / (2.0 * eps_i)
    c2 = math.pi * (ea_i * x_i) ** 2 / (2.0 * (t2 - t_i) ** 2)
    return Schedule(t_i, t_f, gamma_i, gamma_f, value, derivative, "UQ2", c2, (t2,))


# ---------------------------------------------------------------------------
# closed forms: parametric harmonic oscillator, lam = omega

HO_COUPLING = math.sqrt(2.0) / 2.0


def ho_fqa(omega_i: float, omega_f: float, t_i: float, t_f: float) -> Schedule:
    """``1/omega`` linear in time."""
    _check_times(t_i, t_f)
    tau = t_f - t_i
    rate = (1.0 / omega_f - 1.0 / omega_i) / tau

    def value(t):
        return 1.0 / (1.0 / omega_i + rate * np.clip(t - t_i, 0.0, tau))

    def derivative(t):
        w = value(t)
        return -rate * w * w

    c1 = HO_COUPLING * abs(1.0 / omega_i - 1.0 / omega_f) / (4.0 * tau)
    return Schedule(t_i, t_f, omega_i, omega_f, value, derivative, "FQA", c1)


def ho_fq2(omega_i: float, omega_f: float, t_i: float, t_f: float) -> Schedule:
    """``omega = omega_i exp(+/- z**2)`` with ``z`` from an inverse error function.

    Expansion of the frequency uses ``erf``; compression continues
    ``sqrt(log(omega_f/omega_i))`` to the imaginary axis, i.e. ``erfi``.
    """
    _check_times(t_i, t_f)
    if omega_f == omega_i:
        raise SynthesisError("endpoints coincide")
    tau = t_f - t_i
    up = omega_f > omega_i
    a = math.sqrt(abs(math.log(omega_f / omega_i)))
    sqrt_pi = math.sqrt(math.pi)
    if up:
        fa = float(erf(a))

        def z_and_rate(t):
            s = np.clip((t - t_i) / tau, 0.0, 1.0)
            z = np.asarray(inv_erf(np.minimum(s * fa, np.nextafter(1.0, 0.0))))
            return z, fa / tau * sqrt_pi / 2.0 * np.exp(z * z)
    else:
        fa = float(erfi(a))

        def z_and_rate(t):
            s = np.clip((t - t_i) / tau, 0.0, 1.0)
            z = np.asarray(inv_erfi(s * fa))
            return z, fa / tau * sqrt_pi / 2.0 * np.exp(-z * z)

    sgn = 1.0 if up else -1.0

    def value(t):
        z, _ = z_and_rate(t)
        return omega_i * np.exp(sgn * z * z)

    def derivative(t):
        z, dz = z_and_rate(t)
        return omega_i * np.exp(sgn * z * z) * sgn * 2.0 * z * dz

    # w = omega_dot/omega**2 obeys dw/dt = +/- C omega with C = pi F(a)^2 / (2 omega_i^2 tau^2)
    big_c = math.pi * fa**2 / (2.0 * omega_i**2 * tau**2)
    c2 = big_c * HO_COUPLING / 8.0
    return Schedule(t_i, t_f, omega_i, omega_f, value, derivative, "FQ2", c2)


def iie(m: float, omega_i: float, omega_f: float, t_i: float, t_f: float, *,
        check_points: int = DEFAULT_SAMPLES) -> Schedule:
    """Invariant-based protocol from a quintic Ermakov scaling ``b(t)``.

    ``b`` runs from 1 to ``sqrt(omega_i/omega_f)`` with vanishing first and
    second derivatives at both ends; ``omega**2 = omega_i**2/b**4 - b''/b``.
    The mass does not enter the frequency protocol.
    """
    _check_times(t_i, t_f)
    if not (m > 0 and omega_i > 0 and omega_f > 0):
        raise ValueError("mass and frequencies must be positive")
    tau = t_f - t_i
    d = math.sqrt(omega_i / omega_f) - 1.0

    def b_derivs(t):
        s = np.clip((t - t_i) / tau, 0.0, 1.0)
        b = 1.0 + d * s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
        b1 = d * 30.0 * s * s * (1.0 - s) ** 2 / tau
        b2 = d * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / tau**2
        b3 = d * 60.0 * (1.0 - 6.0 * s + 6.0 * s * s) / tau**3
        return b, b1, b2, b3

    def omega_sq(t):
        b, _, b2, _ = b_derivs(t)
        return omega_i**2 / b**4 - b2 / b

    def value(t):
        return np.sqrt(omega_sq(t))

    def derivative(t):
        b, b1, b2, b3 = b_derivs(t)
        dw2 = -4.0 * omega_i**2 * b1 / b**5 - (b3 * b - b2 * b1) / (b * b)
        return dw2 / (2.0 * value(t))

    probe = omega_sq(np.linspace(t_i, t_f, check_points))
    if np.any(probe <= 0):
        raise SynthesisError("IIE protocol requires an inverted trap (omega**2 <= 0)")
    return Schedule(t_i, t_f, omega_i, omega_f, value, derivative, "IIE")


def residual_check(sched: Schedule, channel: GapChannel, order: int, *,
                   window=None, n_samples: int = 4001, margin: float = 0.01) -> float:
    """Relative spread of the FQA (order 1) or FQ2 (order 2) ODE constant.

    Samples the left-hand side on the interior of ``window`` (default: the
    whole schedule), trimming ``margin`` of its length at each end, and
    returns ``max|LHS - median| / median``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    a, b = window if window is not None else (sched.t_i, sched.t_f)
    trim = margin * (b - a)
    t = np.linspace(a + trim, b - trim, n_samples)
    lam = sched.value(t)
    e = channel.gap(lam)
    q = sched.derivative(t) * channel.coupling(lam) / (e * e)
    if order == 1:
        lhs = np.abs(q)
    else:
        lhs = np.abs(np.gradient(q, t, edge_order=2)) / e
    med = float(np.median(lhs))
    return float(np.max(np.abs(lhs - med)) / med)
