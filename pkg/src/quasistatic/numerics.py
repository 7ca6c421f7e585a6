"""Low-level numerical routines.

Fixed-step fourth-order Runge-Kutta, bracketed inversion of monotone
functions, scalar shooting, and the error function family (``erf``,
``erfi`` and their inverses).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special

from .errors import BracketError, DomainError, IntegrationError, MonotonicityError

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class SampledSolution:
    """States of an integration on a uniform time grid.

    ``y[j]`` is the state at ``t[j]``; the state itself may be any array shape.
    """

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if len(self.t) != len(self.y):
            raise ValueError("time grid and values differ in length")
        if len(self.t) > 2:
            dt = np.diff(self.t)
            if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
                raise ValueError("time grid is not uniform")

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self):
        return len(self.t)


def rk4_integrate(rhs: Callable, y0, t_i: float, t_f: float, n_steps: int, *,
                  stop: Callable | None = None, stride: int = 1) -> SampledSolution:
    """Integrate ``y' = rhs(t, y)`` with classical RK4 and record the states.

    Stage times are ``t_j``, ``t_j + h/2`` and ``t_j + h`` with
    ``t_j = t_i + j*h`` computed directly (no accumulated round-off), so a
    right-hand side may tabulate its coefficients on the half-step grid.
    If ``stop(t, y)`` turns true after a step, the solution is truncated there.
    Only every ``stride``-th state is kept; ``n_steps`` must be a multiple of it.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if stride < 1 or n_steps % stride:
        raise ValueError("n_steps must be a positive multiple of stride")
    if not t_f > t_i:
        raise ValueError("t_f must exceed t_i")
    y = np.array(y0, dtype=np.result_type(np.asarray(y0).dtype, float), copy=True)
    h = (t_f - t_i) / n_steps
    t = t_i + h * np.arange(n_steps + 1)
    out = np.empty((n_steps // stride + 1,) + y.shape, dtype=y.dtype)
    out[0] = y
    half = 0.5 * h
    for j in range(n_steps):
        tj = t[j]
        k1 = rhs(tj, y)
        k2 = rhs(tj + half, y + half * k1)
        k3 = rhs(tj + half, y + half * k2)
        k4 = rhs(t[j + 1], y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at step {j + 1}", step=j + 1)
        if (j + 1) % stride == 0:
            out[(j + 1) // stride] = y
        if stop is not None and stop(t[j + 1], y):
            if stride != 1:
                raise ValueError("stop requires stride 1")
            return SampledSolution(t[: j + 2], out[: j + 2])
    return SampledSolution(t[::stride], out)


def _evaluate(g, x):
    x = np.asarray(x, dtype=float)
    val = np.asarray(g(x), dtype=float)
    if val.shape != x.shape:
        val = np.vectorize(lambda s: float(g(s)))(x)
    return val


def invert_monotone(g: Callable, target, bracket, *, dg: Callable | None = None,
                    samples: int = 65, max_iter: int = 200):
    """Solve ``g(x) = target`` for ``x`` inside ``bracket``.

    ``g`` must be strictly monotone on the bracket; ``target`` may be a scalar
    or an array (``g`` is then called on arrays). When ``dg`` is supplied the
    bisection is accelerated by safeguarded Newton steps.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise BracketError("empty bracket")
    xs = np.linspace(lo, hi, samples)
    gs = _evaluate(g, xs)
    if not np.all(np.isfinite(gs)):
        raise MonotonicityError("function not finite on the bracket")
    steps = np.diff(gs)
    increasing = gs[-1] > gs[0]
    if not (np.all(steps > 0) if increasing else np.all(steps < 0)):
        raise MonotonicityError("function is not strictly monotone on the bracket")

    scalar = np.ndim(target) == 0
    y = np.atleast_1d(np.asarray(target, dtype=float))
    g_lo, g_hi = (gs[0], gs[-1]) if increasing else (gs[-1], gs[0])
    slack = 1e-12 * max(abs(g_hi - g_lo), abs(g_lo), abs(g_hi))
    if np.any(y < g_lo - slack) or np.any(y > g_hi + slack):
        raise BracketError("target outside the range of g on the bracket")
    sign = 1.0 if increasing else -1.0

    # Sampled nodes narrow the bracket before iterating.
    ordered = gs if increasing else gs[::-1]
    idx = np.clip(np.searchsorted(ordered, y), 1, samples - 1)
    if increasing:
        a, b = xs[idx - 1].copy(), xs[idx].copy()
    else:
        a, b = xs[samples - 1 - idx].copy(), xs[samples - idx].copy()
    x = 0.5 * (a + b)
    tol = 4.0 * np.finfo(float).eps * max(abs(lo), abs(hi), 1e-300)
    for _ in range(max_iter):
        r = _evaluate(g, x) - y
        f = sign * r
        a = np.where(f < 0, x, a)
        b = np.where(f > 0, x, b)
        done = (f == 0) | (b - a <= tol)
        if np.all(done):
            break
        mid = 0.5 * (a + b)
        if dg is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = x - r / _evaluate(dg, x)
            ok = np.isfinite(newton) & (newton > a) & (newton < b)
            x_new = np.where(ok, newton, mid)
        else:
            x_new = mid
        x = np.where(done, x, x_new)
    return float(x[0]) if scalar else x


def shoot_scalar(residual: Callable[[float], float], bracket, *, rtol: float = 1e-12) -> float:
    """Root of a scalar residual that changes sign on ``bracket``."""
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = residual(a), residual(b)
    if not (np.isfinite(fa) and np.isfinite(fb)):
        raise BracketError("residual not finite at the bracket ends")
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a}, {b}]")
    xtol = 1e-15 * max(abs(a), abs(b))
    return float(optimize.brentq(residual, a, b, xtol=xtol, rtol=max(rtol, 4 * np.finfo(float).eps),
                                 maxiter=500))


def erf(x):
    return special.erf(x)


def erfi(x):
    """Imaginary error function, ``erf(i x) / i``."""
    out = special.erfi(x)
    if not np.all(np.isfinite(out)):
        raise OverflowError("erfi overflows for |x| beyond ~26.6")
    return out


def inv_erf(y):
    y_arr = np.asarray(y, dtype=float)
    if np.any(~(np.abs(y_arr) < 1.0)):
        raise DomainError("inv_erf requires |y| < 1")
    x = special.erfinv(y_arr)
    # One Newton polish; skipped where the slope underflows.
    slope = 2.0 / _SQRT_PI * np.exp(-x * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = (special.erf(x) - y_arr) / slope
    x = np.where(np.isfinite(dx) & (slope > 1e-300), x - dx, x)
    return float(x) if np.ndim(y) == 0 else x


def inv_erfi(y):
    """Inverse of :func:`erfi` by bracketed Newton iteration."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y_arr)):
        raise DomainError("inv_erfi requires a finite argument")
    sgn = np.sign(y_arr)
    target = np.abs(y_arr)
    a = np.zeros_like(target)
    b = np.ones_like(target)
    while True:
        short = special.erfi(b) < target
        if not np.any(short):
            break
        if np.any(b > 27.0):
            raise DomainError("inv_erfi argument too large")
        a = np.where(short, b, a)
        b = np.where(short, 2.0 * b, b)
    x = np.where(target < 0.5, target * _SQRT_PI / 2.0, 0.5 * (a + b))
    for _ in range(200):
        f = special.erfi(x) - target
        a = np.where(f < 0, x, a)
        b = np.where(f > 0, x, b)
        slope = 2.0 / _SQRT_PI * np.exp(x * x)
        newton = x - f / slope
        inside = (newton >= a) & (newton <= b)
        x_new = np.where(inside, newton, 0.5 * (a + b))
        if np.all(np.abs(x_new - x) <= 2 * np.finfo(float).eps * np.maximum(np.abs(x_new), 1e-300)):
            x = x_new
            break
        x = x_new
    x = sgn * x
    return float(x[0]) if np.ndim(y) == 0 else x
