"""Nonstationary Ornstein-Uhlenbeck and random telegraph noise.

Both processes are time-homogeneous Markov processes whose nonstationarity
comes entirely from the initial single-point law:

* OU: ``dx = -gamma x dt + sqrt(2 gamma) sigma dW`` started from
  ``N(b chi, sigma^2 (1 - b^2))``.
* RTN: symmetric two-state jumps between ``+nu`` and ``-nu`` at rate
  ``lam``, started in ``+nu`` with probability ``(1 + a) / 2``.

The module holds the parameter types, the exact probability laws and
low-order moments, and exact samplers (no time-discretisation error).
Samplers never own a generator; callers pass a ``numpy.random.Generator``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DomainError

__all__ = [
    "OuParams",
    "RtnParams",
    "Coupling",
    "NoiseModel",
    "NoisePath",
    "DeltaDensity",
    "ou_transition_density",
    "ou_single_point_density",
    "ou_mean",
    "ou_variance",
    "ou_second_moment",
    "ou_ordered_cumulant",
    "rtn_transition_prob",
    "rtn_single_point",
    "rtn_mean",
    "rtn_second_moment",
    "sample_ou_path",
    "sample_rtn_path",
    "ou_initial_draw",
    "ou_exact_step",
    "sample_ou_ensemble",
    "rtn_initial_draw",
    "rtn_advance",
]


@dataclass(frozen=True)
class OuParams:
    """Nonstationary OU noise.

    Attributes:
        gamma: relaxation rate (1/time), > 0.
        sigma: stationary standard deviation, > 0.
        b: nonstationary parameter, ``|b| < 1``.
        chi: initial offset; the initial mean is ``b * chi``.
    """

    gamma: float
    sigma: float
    b: float = 0.0
    chi: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not abs(self.b) < 1:
            raise DomainError(f"|b| must be < 1, got {self.b}")
        if not np.isfinite(self.chi):
            raise DomainError(f"chi must be finite, got {self.chi}")

    @property
    def kind(self) -> str:
        return "oun"


@dataclass(frozen=True)
class RtnParams:
    """Nonstationary random telegraph noise.

    Attributes:
        lam: switching rate (1/time), > 0.
        nu: amplitude; the process takes the values ``+nu`` and ``-nu``.
        a: initial nonstationary parameter, ``|a| <= 1``.
    """

    lam: float
    nu: float
    a: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be > 0, got {self.lam}")
        if not self.nu > 0:
            raise DomainError(f"nu must be > 0, got {self.nu}")
        if not abs(self.a) <= 1:
            raise DomainError(f"|a| must be <= 1, got {self.a}")

    @property
    def r(self) -> float:
        """Regime ratio ``lam / nu``; strong coupling iff ``|c| > r``."""
        return self.lam / self.nu

    @property
    def kind(self) -> str:
        return "rtn"


NoiseModel = Union[OuParams, RtnParams]


@dataclass(frozen=True)
class Coupling:
    """Frequency fluctuation ``delta_omega(t) = c * x(t)**k``."""

    c: float
    k: int = 1

    def __post_init__(self):
        if self.c == 0 or not np.isfinite(self.c):
            raise DomainError(f"coupling constant must be finite and nonzero, got {self.c}")
        if isinstance(self.k, bool) or self.k not in (1, 2):
            raise DomainError(f"exponent k must be 1 or 2, got {self.k!r}")


@dataclass(frozen=True)
class DeltaDensity:
    """Degenerate transition law at zero elapsed time: a point mass at ``x0``."""

    x0: float


@dataclass
class NoisePath:
    """One realisation of the noise.

    For OU paths ``values[i]`` is the sampled value at ``times[i]``. For RTN
    paths the path is piecewise constant: ``values[i]`` holds on
    ``[times[i], times[i+1])``, ``times`` contains 0, every switch time and
    the horizon, and ``switch_times`` repeats the interior points.
    """

    times: np.ndarray
    values: np.ndarray
    switch_times: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise DomainError("times and values must have the same length")
        if self.times.size == 0 or self.times[0] != 0.0:
            raise DomainError("a noise path starts at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("path times must be strictly increasing")

    def value_at(self, t: float) -> float:
        """State at time ``t`` (piecewise constant lookup, RTN paths)."""
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(i, 0)])

    def integral(self, t: float, k: int = 1) -> float:
        """Exact ``int_0^t x(s)**k ds`` for a piecewise-constant path."""
        if self.switch_times is None:
            raise DomainError("exact integrals are only defined for RTN paths")
        edges = np.minimum(self.times, t)
        return float(np.sum(self.values[:-1] ** k * np.diff(edges)))


def _check_order(t, t2):
    if np.any(np.asarray(t) < np.asarray(t2)):
        raise DomainError("two-time quantities require t >= t2")


# --------------------------------------------------------------------------
# OU laws

def ou_transition_density(x, t, x0, t0, p: OuParams):
    """Gaussian transition density ``P(x, t | x0, t0)``.

    Returns a :class:`DeltaDensity` when ``t == t0``.
    """
    if t < t0:
        raise DomainError(f"transition density needs t >= t0, got t={t}, t0={t0}")
    if t == t0:
        return DeltaDensity(float(x0))
    decay = np.exp(-p.gamma * (t - t0))
    var = p.sigma**2 * -np.expm1(-2.0 * p.gamma * (t - t0))
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - x0 * decay) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def ou_mean(t, p: OuParams):
    return p.b * p.chi * np.exp(-p.gamma * np.asarray(t, dtype=float))


def ou_variance(t, p: OuParams):
    """Single-point variance ``sigma^2 (1 - b^2 e^{-2 gamma t})``."""
    return p.sigma**2 * (1.0 - p.b**2 * np.exp(-2.0 * p.gamma * np.asarray(t, dtype=float)))


def ou_single_point_density(x, t, p: OuParams):
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be >= 0")
    var = ou_variance(t, p)
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - ou_mean(t, p)) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def ou_second_moment(t, t2, p: OuParams):
    """``<x(t) x(t2)>`` for ``t >= t2``."""
    _check_order(t, t2)
    t, t2 = np.asarray(t, dtype=float), np.asarray(t2, dtype=float)
    e2 = np.exp(-2.0 * p.gamma * t2)
    return np.exp(-p.gamma * (t - t2)) * (
        p.sigma**2 * (1.0 - p.b**2 * e2) + (p.b * p.chi) ** 2 * e2
    )


def ou_ordered_cumulant(t, t2, p: OuParams):
    """Second-order time-ordered cumulant ``<x(t) x(t2)> - <x(t)><x(t2)>``."""
    _check_order(t, t2)
    t, t2 = np.asarray(t, dtype=float), np.asarray(t2, dtype=float)
    return p.sigma**2 * (np.exp(-p.gamma * (t - t2)) - p.b**2 * np.exp(-p.gamma * (t + t2)))


# --------------------------------------------------------------------------
# RTN laws

def _rtn_sign(x, p: RtnParams):
    x = np.asarray(x, dtype=float)
    if not np.all(np.abs(x) == p.nu):
        raise DomainError(f"RTN values must be +/-{p.nu}")
    return np.sign(x)


def rtn_transition_prob(x, t, x2, t2, p: RtnParams):
    """``P(x, t | x2, t2)`` for ``x, x2`` in ``{+nu, -nu}``."""
    _check_order(t, t2)
    same = _rtn_sign(x, p) == _rtn_sign(x2, p)
    e = np.exp(-2.0 * p.lam * (np.asarray(t, dtype=float) - t2))
    return np.where(same, 0.5 * (1.0 + e), 0.5 * (1.0 - e))


def rtn_single_point(x, t, p: RtnParams):
    s = _rtn_sign(x, p)
    return 0.5 * (1.0 + s * p.a * np.exp(-2.0 * p.lam * np.asarray(t, dtype=float)))


def rtn_mean(t, p: RtnParams):
    """``<x(t)> = a nu e^{-2 lam t}``.

    The printed appendix formula carries an extra factor of the coupling
    constant; it does not follow from the initial law and fails both the
    sampling check and the time-convolution equation for ``c != 1``.
    """
    return p.a * p.nu * np.exp(-2.0 * p.lam * np.asarray(t, dtype=float))


def rtn_second_moment(t, t2, p: RtnParams):
    """``<x(t) x(t2)> = nu^2 e^{-2 lam (t - t2)}``, independent of ``a``."""
    _check_order(t, t2)
    return p.nu**2 * np.exp(-2.0 * p.lam * (np.asarray(t, dtype=float) - t2))


# --------------------------------------------------------------------------
# exact samplers

def ou_initial_draw(p: OuParams, rng: np.random.Generator, n: int) -> np.ndarray:
    return p.b * p.chi + p.sigma * np.sqrt(1.0 - p.b**2) * rng.standard_normal(n)


def ou_exact_step(x: np.ndarray, h: float, p: OuParams, z: np.ndarray) -> np.ndarray:
    """Advance OU values by ``h`` with the exact Gaussian kernel, given N(0,1) draws ``z``."""
    decay = np.exp(-p.gamma * h)
    return x * decay + p.sigma * np.sqrt(-np.expm1(-2.0 * p.gamma * h)) * z


def _check_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("time grid must be a non-empty 1-d sequence")
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise DomainError("time grid must start at 0 and be strictly increasing")
    return times


def sample_ou_ensemble(p: OuParams, times, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent OU paths on ``times``; shape ``(n, len(times))``."""
    times = _check_grid(times)
    out = np.empty((n, times.size))
    out[:, 0] = ou_initial_draw(p, rng, n)
    for j, h in enumerate(np.diff(times)):
        out[:, j + 1] = ou_exact_step(out[:, j], h, p, rng.standard_normal(n))
    return out


def sample_ou_path(p: OuParams, times, rng: np.random.Generator) -> NoisePath:
    """One OU path on ``times`` drawn from the exact transition law."""
    times = _check_grid(times)
    return NoisePath(times, sample_ou_ensemble(p, times, rng, 1)[0])


def rtn_initial_draw(p: RtnParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Initial signs (+1 / -1); ``+1`` with probability ``(1 + a) / 2``."""
    return np.where(rng.random(n) < 0.5 * (1.0 + p.a), 1.0, -1.0)


def rtn_advance(signs: np.ndarray, h: float, p: RtnParams, rng: np.random.Generator):
    """Evolve RTN signs in place over a window of length ``h``.

    Switches are generated event by event with Exp(lam) waiting times; by
    memorylessness the clock may restart at every window boundary.

    Returns:
        ``(occupation, flips)`` where ``occupation = int sign(x) ds`` over the
        window (exact) and ``flips`` counts switches per trajectory.
    """
    n = signs.size
    remaining = np.full(n, float(h))
    occupation = np.zeros(n)
    flips = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    scale = 1.0 / p.lam
    while active.size:
        w = rng.exponential(scale, active.size)
        hit = w < remaining[active]
        done = active[~hit]
        occupation[done] += signs[done] * remaining[done]
        sw = active[hit]
        wh = w[hit]
        occupation[sw] += signs[sw] * wh
        remaining[sw] -= wh
        signs[sw] = -signs[sw]
        flips[sw] += 1
        active = sw
    return occupation, flips


def sample_rtn_path(p: RtnParams, horizon: float, rng: np.random.Generator) -> NoisePath:
    """One RTN path on ``[0, horizon]`` with exact switch times."""
    if not horizon > 0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    sign = 1.0 if rng.random() < 0.5 * (1.0 + p.a) else -1.0
    times, values = [0.0], [sign * p.nu]
    t = 0.0
    while True:
        t += rng.exponential(1.0 / p.lam)
        if t >= horizon:
            break
        sign = -sign
        times.append(t)
        values.append(sign * p.nu)
    times.append(float(horizon))
    values.append(sign * p.nu)
    times = np.array(times)
    return NoisePath(times, np.array(values), switch_times=times[1:-1].copy())
