"""Stochastic Liouville equation for the marginal average ``F(x, t)``.

``F(x, t)`` is the phase average conditioned on the noise currently holding
the value ``x``; integrating (OU) or summing (RTN) over ``x`` gives
``F(t)``. For OU noise it obeys the complex Fokker-Planck equation

    dF/dt = i c x^k F + gamma d/dx (x F) + gamma sigma^2 d^2F/dx^2,

solved here on a truncated line with zero-flux ends. For RTN it reduces to
two coupled linear ODEs, integrated with classic RK4.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericalError
from .noise import Coupling, OuParams, RtnParams

__all__ = [
    "Scheme",
    "GridSpec",
    "MarginalField",
    "RtnMarginalSeries",
    "fokker_planck_operator",
    "solve_ou_marginal",
    "ou_marginal_closed_form",
    "solve_rtn_marginal",
]


class Scheme(enum.Enum):
    CRANK_NICOLSON = "crank-nicolson"
    BACKWARD_EULER = "backward-euler"


@dataclass(frozen=True)
class GridSpec:
    """Discretisation of the OU marginal equation.

    ``x_half_width`` is measured in units of ``sigma``; ``n_x`` is odd so that
    ``x = 0`` is a node. ``t_max`` must be a whole number of ``dt`` steps.
    """

    dt: float
    t_max: float
    x_half_width: float = 8.0
    n_x: int = 1025
    scheme: Scheme = Scheme.CRANK_NICOLSON

    def __post_init__(self):
        if self.n_x < 65 or self.n_x % 2 == 0:
            raise DomainError(f"n_x must be odd and >= 65, got {self.n_x}")
        if not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if not self.t_max > 0:
            raise DomainError(f"t_max must be > 0, got {self.t_max}")
        if self.x_half_width < 6:
            raise DomainError(f"x_half_width must be >= 6 sigma, got {self.x_half_width}")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def n_steps(self) -> int:
        n = round(self.t_max / self.dt)
        if abs(n * self.dt - self.t_max) > 1e-9 * self.t_max:
            raise DomainError("t_max must be an integer multiple of dt")
        return n


@dataclass
class MarginalField:
    """Snapshots ``field[j, i] = F(x[i], times[j])`` and the reduced ``F[j]``."""

    x: np.ndarray
    times: np.ndarray
    field: np.ndarray
    F: np.ndarray


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def fokker_planck_operator(x: np.ndarray, p: OuParams, coupling: Coupling) -> sp.csc_matrix:
    """Tridiagonal generator of the marginal equation on a uniform grid.

    Finite-volume form: interface fluxes ``J = -gamma (x F + sigma^2 F')``
    with centred averages, zero flux through both ends and half cells at the
    boundary nodes. The trapezoid rule is then exactly conserved by the
    transport part.
    """
    n = x.size
    h = x[1] - x[0]
    g, s2 = p.gamma, p.sigma**2
    xm = 0.5 * (x[:-1] + x[1:])
    # flux J_{i+1/2} = lo[i] * F_i + hi[i] * F_{i+1}
    lo = -g * (0.5 * xm - s2 / h)
    hi = -g * (0.5 * xm + s2 / h)
    cell = np.full(n, h)
    cell[0] = cell[-1] = 0.5 * h

    diag = np.zeros(n, dtype=complex)
    upper = np.zeros(n - 1, dtype=complex)
    lower = np.zeros(n - 1, dtype=complex)
    # outgoing flux through i+1/2
    diag[:-1] -= lo / cell[:-1]
    upper -= hi / cell[:-1]
    # incoming flux through i-1/2
    diag[1:] += hi / cell[1:]
    lower += lo / cell[1:]
    diag += 1j * coupling.c * x**coupling.k
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csc")


def solve_ou_marginal(
    p: OuParams, coupling: Coupling, grid: GridSpec, save_every: int = 1
) -> MarginalField:
    """Time-step the OU marginal equation from the initial noise law.

    Implicit schemes only: the ``i c x^2`` source is stiff at large ``|x|``.
    ``save_every`` controls how often field snapshots are kept; ``F`` is
    stored at the same times.
    """
    if save_every < 1:
        raise DomainError("save_every must be >= 1")
    n_steps = grid.n_steps
    half = grid.x_half_width * p.sigma
    x = np.linspace(-half, half, grid.n_x)
    h = x[1] - x[0]
    w = _trapezoid_weights(grid.n_x, h)

    var0 = p.sigma**2 * (1.0 - p.b**2)
    f = np.exp(-((x - p.b * p.chi) ** 2) / (2.0 * var0)) / math.sqrt(2.0 * math.pi * var0)
    f = f.astype(complex)

    L = fokker_planck_operator(x, p, coupling)
    eye = sp.identity(grid.n_x, dtype=complex, format="csc")
    if grid.scheme is Scheme.CRANK_NICOLSON:
        lhs = splu(eye - 0.5 * grid.dt * L)
        rhs = eye + 0.5 * grid.dt * L
    else:
        lhs = splu(eye - grid.dt * L)
        rhs = eye

    saved = [f.copy()]
    times = [0.0]
    for step in range(1, n_steps + 1):
        f = lhs.solve(rhs @ f)
        if step % save_every == 0 or step == n_steps:
            if not np.all(np.isfinite(f)):
                raise NumericalError(f"non-finite marginal field at t = {step * grid.dt:g}")
            saved.append(f.copy())
            times.append(step * grid.dt)
    field = np.array(saved)
    return MarginalField(x=x, times=np.array(times), field=field, F=field @ w)


def ou_marginal_closed_form(x, t: float, p: OuParams, coupling: Coupling):
    """Closed-form ``F(x, t)`` for linear or quadratic OU coupling."""
    if t < 0:
        raise DomainError("t must be >= 0")
    x = np.asarray(x, dtype=float)
    g, s2, c = p.gamma, p.sigma**2, coupling.c
    bchi = p.b * p.chi
    if coupling.k == 1:
        e = math.exp(-g * t)
        eta = -math.expm1(-g * t)
        var = s2 * (1.0 - p.b**2 * e * e)
        # mean shifted by i c Cov(phase, x(t))
        mu = bchi * e + 1j * (c * s2 / g) * eta * (1.0 - p.b**2 * e)
        expo = (
            -((x - mu) ** 2) / (2.0 * var)
            + 1j * (c * bchi / g) * eta
            - (c * p.sigma / g) ** 2 * (g * t - eta - 0.5 * p.b**2 * eta**2)
        )
        return np.exp(expo) / math.sqrt(2.0 * math.pi * var)

    eps = np.sqrt(complex(1.0, -4.0 * c * s2 / g))
    b2 = p.b**2
    lp = (1.0 - b2) * eps + (1.0 + b2)
    lm = (1.0 - b2) * eps - (1.0 + b2)
    E1 = np.exp(-eps * g * t)
    E = E1 * E1
    A = lp + lm * E
    # sqrt(eps / (pi sigma^2 A)) continued from its real value at t = 0
    r = lm / lp
    pref = np.sqrt((1.0 + r) / (1.0 + r * E)) / math.sqrt(2.0 * math.pi * s2 * (1.0 - b2))
    expo = (
        (lm * (eps - 1.0) * E - lp * (eps + 1.0)) / (4.0 * s2 * A) * x**2
        + 2.0 * bchi * eps * E1 / (s2 * A) * x
        - bchi**2 * ((eps + 1.0) * E + eps - 1.0) / (2.0 * s2 * A)
        - 0.5 * g * (eps - 1.0) * t
    )
    return pref * np.exp(expo)


@dataclass
class RtnMarginalSeries:
    """``F(+nu, t)``, ``F(-nu, t)`` and their sum on ``times``."""

    times: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray

    @property
    def F(self) -> np.ndarray:
        return self.f_plus + self.f_minus


def max_rtn_step(p: RtnParams, coupling: Coupling) -> float:
    return 0.01 / max(p.lam, abs(coupling.c) * p.nu**coupling.k)


def solve_rtn_marginal(
    p: RtnParams, coupling: Coupling, dt: float, t_max: float, save_every: int = 1
) -> RtnMarginalSeries:
    """RK4 integration of the two-state marginal equations.

    Requires ``dt <= 0.01 / max(lam, |c| nu^k)``.
    """
    if not 0 < dt <= max_rtn_step(p, coupling) * (1 + 1e-12):
        raise DomainError(
            f"dt = {dt:g} exceeds the stability/accuracy bound {max_rtn_step(p, coupling):g}"
        )
    n_steps = round(t_max / dt)
    if n_steps < 1 or abs(n_steps * dt - t_max) > 1e-9 * t_max:
        raise DomainError("t_max must be a positive integer multiple of dt")
    c, k, lam, nu = coupling.c, coupling.k, p.lam, p.nu
    M = np.array(
        [[1j * c * nu**k - lam, lam], [lam, 1j * c * (-nu) ** k - lam]], dtype=complex
    )

    def rhs(y):
        return M @ y

    y = np.array([0.5 * (1.0 + p.a), 0.5 * (1.0 - p.a)], dtype=complex)
    out = [y]
    times = [0.0]
    for step in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % save_every == 0 or step == n_steps:
            out.append(y)
            times.append(step * dt)
    out = np.array(out)
    return RtnMarginalSeries(times=np.array(times), f_plus=out[:, 0], f_minus=out[:, 1])
