"""Reduced two-level dynamics driven by a decoherence trace.

Conventions: ``sigma_z = diag(-1, +1)`` in the basis ``(|0>, |1>)``, so the
coherence obeys ``rho01(t) = F(t) e^{i omega0 t} rho01(0)`` and the
time-local master equation reads

    d rho01 / dt = [i (omega0 - S(t)) - Gamma(t)] rho01.

Also holds the two alternative dynamical equations for ``F(t)``: the
second-order time-convolutionless equation for linear OU coupling and the
exponential-kernel Volterra equation for linear RTN coupling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, NumericalError
from .noise import Coupling, OuParams, RtnParams, rtn_mean

__all__ = [
    "DIVERGENCE_EPS",
    "TwoLevelState",
    "CoherenceSeries",
    "RateTrace",
    "evolve_coherence",
    "extract_rates",
    "propagate_master_equation",
    "tcl2_solve_ou_linear",
    "volterra_solve_rtn_linear",
]

# |F| below which Gamma and S are treated as undefined
DIVERGENCE_EPS = 1e-9


@dataclass(frozen=True)
class TwoLevelState:
    """Density matrix of a qubit, stored as populations plus coherence."""

    rho00: float
    rho11: float
    rho01: complex
    omega0: float = 0.0

    def __post_init__(self):
        if self.rho00 < 0 or self.rho11 < 0:
            raise DomainError("populations must be non-negative")
        if abs(self.rho00 + self.rho11 - 1.0) > 1e-12:
            raise DomainError("populations must sum to 1")
        if abs(self.rho01) ** 2 > self.rho00 * self.rho11 + 1e-12:
            raise DomainError("|rho01|^2 exceeds rho00 * rho11; state is not positive")

    @classmethod
    def plus_state(cls, omega0: float = 0.0) -> "TwoLevelState":
        """The equal superposition ``(|0> + |1>) / sqrt(2)``."""
        return cls(0.5, 0.5, 0.5 + 0j, omega0)


@dataclass
class CoherenceSeries:
    """Populations and coherence of the qubit on a time grid."""

    times: np.ndarray
    rho00: np.ndarray
    rho11: np.ndarray
    rho01: np.ndarray


@dataclass
class RateTrace:
    """Decoherence rate and frequency shift, with divergence flags.

    Flagged entries hold ``nan``; every unflagged entry is finite.
    """

    times: np.ndarray
    gamma: np.ndarray
    shift: np.ndarray
    diverged: np.ndarray


def _uniform_times(n: int, dt: float) -> np.ndarray:
    return dt * np.arange(n)


def evolve_coherence(initial: TwoLevelState, F, times) -> CoherenceSeries:
    """Exact coherence ``rho01(t) = F(t) e^{i omega0 t} rho01(0)``."""
    F = np.asarray(F, dtype=complex)
    times = np.asarray(times, dtype=float)
    if F.shape != times.shape or F.ndim != 1:
        raise DomainError("F and times must be 1-D arrays of equal length")
    if abs(F[0] - 1.0) > 1e-12:
        raise DomainError(f"F must start at 1, got {F[0]}")
    rho01 = F * np.exp(1j * initial.omega0 * times) * initial.rho01
    return CoherenceSeries(
        times=times.copy(),
        rho00=np.full(times.size, initial.rho00),
        rho11=np.full(times.size, initial.rho11),
        rho01=rho01,
    )


def _derivative(y: np.ndarray, dt: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt)
    d[-1] = (3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * dt)
    return d


def _segment_min_abs(F: np.ndarray) -> np.ndarray:
    """Distance from 0 to each chord ``[F_j, F_{j+1}]`` of the complex trace."""
    a, b = F[:-1], F[1:]
    d = b - a
    dd = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0, -(a.conjugate() * d).real / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.abs(a + s * d)


def extract_rates(F, dt: float, times=None) -> RateTrace:
    """Numerical ``Gamma = -Re(F'/F)`` and ``S = -Im(F'/F)`` on a uniform grid.

    ``Gamma`` is computed as ``-d|F|/dt / |F|``, which equals
    ``-Re(F'/F)`` and makes pure-phase traces give exactly zero. A point is
    flagged when ``|F|`` falls below ``DIVERGENCE_EPS`` there, or when the
    chord to a neighbouring sample passes that close to the origin (a zero of
    ``F`` between grid points).
    """
    F = np.asarray(F, dtype=complex)
    if F.ndim != 1 or F.size < 3:
        raise DomainError("need a 1-D trace with at least 3 points")
    if not dt > 0:
        raise DomainError("dt must be > 0")
    if times is not None:
        times = np.asarray(times, dtype=float)
        steps = np.diff(times)
        if times.shape != F.shape or np.any(np.abs(steps - dt) > 1e-9 * max(dt, 1.0)):
            raise DomainError("extract_rates requires a uniform grid with spacing dt")
    else:
        times = _uniform_times(F.size, dt)

    mod = np.abs(F)
    near = mod < DIVERGENCE_EPS
    seg = _segment_min_abs(F) < DIVERGENCE_EPS
    flags = near.copy()
    flags[:-1] |= seg
    flags[1:] |= seg

    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = -_derivative(mod, dt) / mod
        shift = -(_derivative(F, dt) / F).imag
    gamma[flags] = np.nan
    shift[flags] = np.nan
    return RateTrace(times=times, gamma=gamma, shift=shift, diverged=flags)


def propagate_master_equation(
    initial: TwoLevelState, rates: RateTrace, omega0: float | None = None
) -> CoherenceSeries:
    """Integrate the time-local master equation with classic RK4.

    Rates at the RK4 half steps come from a cubic spline through the trace.
    Refuses traces carrying divergence flags: the rate equation does not
    determine the coherence across a zero of ``F``.
    """
    if np.any(rates.diverged):
        bad = rates.times[np.asarray(rates.diverged)]
        raise DomainError(
            f"rate trace has {bad.size} divergence-flagged points (first at t = {bad[0]:g}); "
            "restrict the window to a flag-free interval"
        )
    w0 = initial.omega0 if omega0 is None else omega0
    t = np.asarray(rates.times, dtype=float)
    gen = -np.asarray(rates.gamma) + 1j * (w0 - np.asarray(rates.shift))
    if not np.all(np.isfinite(gen)):
        raise NumericalError("non-finite rates on an unflagged window")
    spline = CubicSpline(t, gen)
    mid = spline(0.5 * (t[:-1] + t[1:]))
    h = np.diff(t)

    y = np.empty(t.size, dtype=complex)
    y[0] = initial.rho01
    for j in range(t.size - 1):
        g0, gm, g1, hj = gen[j], mid[j], gen[j + 1], h[j]
        yj = y[j]
        k1 = g0 * yj
        k2 = gm * (yj + 0.5 * hj * k1)
        k3 = gm * (yj + 0.5 * hj * k2)
        k4 = g1 * (yj + hj * k3)
        y[j + 1] = yj + hj / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return CoherenceSeries(
        times=t.copy(),
        rho00=np.full(t.size, initial.rho00),
        rho11=np.full(t.size, initial.rho11),
        rho01=y,
    )


def _steps(dt: float, t_max: float) -> int:
    if not dt > 0 or not t_max > 0:
        raise DomainError("dt and t_max must be > 0")
    n = round(t_max / dt)
    if n < 1 or abs(n * dt - t_max) > 1e-9 * t_max:
        raise DomainError("t_max must be a positive integer multiple of dt")
    return n


def _rk4(rhs, y0, dt: float, n: int, save_every: int):
    """Scalar-tuple RK4 with ``rhs(t, y) -> tuple``; returns saved states."""
    if save_every < 1:
        raise DomainError("save_every must be >= 1")
    y = tuple(y0)
    saved_t, saved_y = [0.0], [y]
    for step in range(n):
        t = step * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
        k3 = rhs(t + 0.5 * dt, tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
        k4 = rhs(t + dt, tuple(a + dt * b for a, b in zip(y, k3)))
        y = tuple(
            a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
        )
        if (step + 1) % save_every == 0 or step + 1 == n:
            saved_t.append((step + 1) * dt)
            saved_y.append(y)
    return np.array(saved_t), saved_y


def tcl2_solve_ou_linear(
    p: OuParams, coupling: Coupling | float, dt: float, t_max: float, save_every: int = 1
):
    """Second-order time-convolutionless equation for linear OU coupling.

    Integrates ``F' = [i c <x(t)> - c^2 K(t)] F`` where ``K(t)`` is the
    integral of the ordered two-time cumulant over ``[0, t]``. Writing
    ``K = sigma^2 (P - b^2 Q)`` with ``P' = 1 - gamma P`` and
    ``Q' = e^{-2 gamma t} - gamma Q`` keeps the cost linear in the number of
    steps. The closure is exact for Gaussian noise, so the result matches
    the closed form to integrator accuracy.

    Returns ``(times, F)``.
    """
    c = _linear_c(coupling)
    n = _steps(dt, t_max)
    g, s2, b2, bchi = p.gamma, p.sigma**2, p.b**2, p.b * p.chi

    def rhs(t, y):
        f, P, Q = y
        K = s2 * (P - b2 * Q)
        drift = 1j * c * bchi * math.exp(-g * t) - c * c * K
        return (drift * f, 1.0 - g * P, math.exp(-2.0 * g * t) - g * Q)

    times, ys = _rk4(rhs, (1.0 + 0j, 0.0, 0.0), dt, n, save_every)
    return times, np.array([y[0] for y in ys])


def volterra_solve_rtn_linear(
    p: RtnParams,
    coupling: Coupling | float,
    dt: float,
    t_max: float,
    save_every: int = 1,
    mean: Callable[[float, RtnParams], float] = rtn_mean,
):
    """Time-convolution equation for linear RTN coupling.

    ``F' = -c^2 int_0^t nu^2 e^{-2 lam (t - s)} F(s) ds + i c <x(t)>``.
    The exponential kernel is carried by the auxiliary ``G`` with
    ``G' = nu^2 F - 2 lam G``. ``mean`` supplies ``<x(t)>``; replacing it is
    how alternative forms of the mean are put to the test.

    Returns ``(times, F)``.
    """
    c = _linear_c(coupling)
    n = _steps(dt, t_max)
    lam, nu2 = p.lam, p.nu**2

    def rhs(t, y):
        f, G = y
        return (-c * c * G + 1j * c * mean(t, p), nu2 * f - 2.0 * lam * G)

    times, ys = _rk4(rhs, (1.0 + 0j, 0j), dt, n, save_every)
    return times, np.array([y[0] for y in ys])


def _linear_c(coupling) -> float:
    if isinstance(coupling, Coupling):
        if coupling.k != 1:
            raise DomainError("this equation is closed only for linear coupling (k = 1)")
        return coupling.c
    return Coupling(float(coupling), 1).c
