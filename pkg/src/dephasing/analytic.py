"""Closed-form decoherence function, rate and shift.

Conventions used throughout::

    F(t)     = < exp(i c int_0^t x(s)^k ds) >
    Gamma(t) = -Re[F'(t) / F(t)]
    S(t)     = -Im[F'(t) / F(t)]

All time arguments accept scalars or arrays. Rates carry units of 1/time in
the same time unit as ``gamma`` (OU) or ``lam`` (RTN).
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .noise import Coupling, NoiseModel, OuParams, RtnParams

__all__ = [
    "ClosedFormResult",
    "QuadraticOuDerived",
    "Regime",
    "RtnDerived",
    "ou_linear_F",
    "ou_linear_gamma",
    "ou_linear_shift",
    "ou_quadratic_derived",
    "ou_quadratic_F",
    "ou_quadratic_F_stationary",
    "ou_quadratic_gamma",
    "ou_quadratic_shift",
    "ou_quadratic_rates_stationary",
    "rtn_derived",
    "rtn_linear_F",
    "rtn_linear_gamma",
    "rtn_linear_shift",
    "rtn_linear_rates",
    "rtn_divergence_times",
    "rtn_sign_change_times",
    "rtn_quadratic_F",
    "rtn_quadratic_gamma",
    "rtn_quadratic_shift",
    "rtn_quadratic_marginals",
    "closed_form",
    "steady_values",
]

# relative size of the RTN rate denominator below which a point is a divergence
DIVERGENCE_RTOL = 1e-12


def _t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("closed forms are defined for t >= 0")
    return t


def _out(x):
    return x[()] if isinstance(x, np.ndarray) else x


@dataclass(frozen=True)
class ClosedFormResult:
    """Closed-form ``F``, ``Gamma`` and ``S`` on a set of times.

    ``diverged`` marks points where ``Gamma`` is infinite (zeros of ``F``
    in the stationary strong-coupling RTN case); ``gamma`` holds ``inf``
    there and ``shift`` holds ``nan``.
    """

    t: np.ndarray
    F: np.ndarray
    gamma: np.ndarray
    shift: np.ndarray
    diverged: np.ndarray


# --------------------------------------------------------------------------
# OU, linear coupling

def ou_linear_F(t, p: OuParams, c: float):
    """Closed-form ``F(t)`` for ``delta_omega = c x``.

    With ``eta = 1 - e^{-gamma t}`` the phase is Gaussian with mean
    ``b chi eta / gamma`` and variance
    ``2 (sigma/gamma)^2 [gamma t - eta - b^2 eta^2 / 2]``. The ``b^2`` term
    enters with a minus sign: the nonstationary start has the smaller
    variance ``sigma^2 (1 - b^2)``, which slows dephasing.
    """
    t = _t(t)
    g = p.gamma
    eta = -np.expm1(-g * t)
    log_f = 1j * (c * p.b * p.chi / g) * eta - (c * p.sigma / g) ** 2 * (
        g * t - eta - 0.5 * p.b**2 * eta**2
    )
    return _out(np.exp(log_f))


def ou_linear_gamma(t, p: OuParams, c: float):
    t = _t(t)
    e = np.exp(-p.gamma * t)
    return _out((c * p.sigma) ** 2 / p.gamma * (1.0 - e) * (1.0 - p.b**2 * e))


def ou_linear_shift(t, p: OuParams, c: float):
    t = _t(t)
    return _out(-c * p.b * p.chi * np.exp(-p.gamma * t))


# --------------------------------------------------------------------------
# OU, quadratic coupling

@dataclass(frozen=True)
class QuadraticOuDerived:
    """Auxiliary constants of the quadratic-OU closed form.

    ``epsilon`` is the principal root of ``1 - 4 i c sigma^2 / gamma``;
    ``alpha`` and ``beta`` are its real and (negated, sign-folded) imaginary
    parts, ``epsilon = alpha - i sign(c) beta``. The real constants
    ``d, g, h, j, u, v`` enter the explicit rate and shift expressions.
    """

    epsilon: complex
    alpha: float
    beta: float
    ell_plus: complex
    ell_minus: complex
    d_plus: float
    d_minus: float
    g_plus: float
    g_minus: float
    h_plus: float
    h_minus: float
    j_plus: float
    j_minus: float
    u: float
    v: float
    # ratio l_-(eps - 1) / (l_+(eps + 1)); |q| < 1
    q: complex


def ou_quadratic_derived(p: OuParams, c: float) -> QuadraticOuDerived:
    g, s2, b2 = p.gamma, p.sigma**2, p.b**2
    eps = cmath.sqrt(1.0 - 4j * c * s2 / g)
    root = math.sqrt(1.0 + 16.0 * c**2 * s2**2 / g**2)
    alpha = math.sqrt((root + 1.0) / 2.0)
    beta = math.sqrt((root - 1.0) / 2.0)
    lp = (1.0 - b2) * eps + (1.0 + b2)
    lm = (1.0 - b2) * eps - (1.0 + b2)
    ap = alpha * (1.0 - b2) + 1.0
    am = alpha * (1.0 - b2) - 1.0
    q = lm * (eps - 1.0) / (lp * (eps + 1.0))
    # F(0) = 1 requires l_+(eps+1) - l_-(eps-1) = 4 eps
    if abs(lp * (eps + 1.0) - lm * (eps - 1.0) - 4.0 * eps) > 1e-10 * abs(4.0 * eps):
        raise ArithmeticError("quadratic OU constants fail the t=0 normalisation identity")
    return QuadraticOuDerived(
        epsilon=eps,
        alpha=alpha,
        beta=beta,
        ell_plus=lp,
        ell_minus=lm,
        d_plus=(alpha + 1.0) ** 2 + beta**2 * ap**2,
        d_minus=(alpha + 1.0) ** 2 - beta**2 * ap**2,
        g_plus=(alpha - 1.0) ** 2 + beta**2 * am**2,
        g_minus=(alpha - 1.0) ** 2 - beta**2 * am**2,
        h_plus=(alpha + 1.0) * am + (alpha - 1.0) * ap,
        h_minus=(alpha + 1.0) * am - (alpha - 1.0) * ap,
        j_plus=beta**2 * (alpha**2 * (1.0 - b2) ** 2 - 1.0) + (alpha**2 - 1.0),
        j_minus=beta**2 * (alpha**2 * (1.0 - b2) ** 2 - 1.0) - (alpha**2 - 1.0),
        u=(alpha + 1.0) * ap,
        v=(alpha - 1.0) * am,
        q=q,
    )


def ou_quadratic_F(t, p: OuParams, c: float):
    """Closed-form ``F(t)`` for ``delta_omega = c x^2``.

    The square-root prefactor is written as ``sqrt((1 - q) / (1 - q E))``
    with ``E = exp(-2 eps gamma t)``; since ``|q E| < 1`` both logarithms stay
    on the principal branch, so the result is continuous in ``t`` and
    evaluated entirely in log space.
    """
    t = _t(t)
    d = ou_quadratic_derived(p, c)
    eps, g = d.epsilon, p.gamma
    E = np.exp(-2.0 * eps * g * t)
    one_minus_qE = 1.0 - d.q * E
    log_f = 0.5 * (np.log(1.0 - d.q) - np.log(one_minus_qE))
    log_f = log_f - 0.5 * g * (eps - 1.0) * t
    if p.b != 0.0 and p.chi != 0.0:
        log_f = log_f - (p.b * p.chi) ** 2 * (eps**2 - 1.0) * (1.0 - E) / (
            2.0 * p.sigma**2 * d.ell_plus * (eps + 1.0) * one_minus_qE
        )
    return _out(np.exp(log_f))


def ou_quadratic_F_stationary(t, p: OuParams, c: float):
    """The ``b = 0`` reduction, written directly in its own form."""
    t = _t(t)
    eps = cmath.sqrt(1.0 - 4j * c * p.sigma**2 / p.gamma)
    E = np.exp(-2.0 * eps * p.gamma * t)
    ratio = 4.0 * eps / ((eps + 1.0) ** 2 - (eps - 1.0) ** 2 * E)
    return _out(np.sqrt(ratio) * np.exp(-0.5 * p.gamma * (eps - 1.0) * t))


def _ou_quadratic_rates(t, p: OuParams, c: float):
    t = _t(t)
    d = ou_quadratic_derived(p, c)
    al, be, g = d.alpha, d.beta, p.gamma
    sn = np.sin(2.0 * be * g * t)
    cs = np.cos(2.0 * be * g * t)
    e2 = np.exp(-2.0 * al * g * t)
    e4 = e2 * e2

    B = be * d.h_plus * sn + d.j_minus * cs
    den = d.d_plus - 2.0 * B * e2 + d.g_plus * e4

    C = be * (d.j_minus - al * d.h_plus) * sn - (al * d.j_minus + be**2 * d.h_plus) * cs
    I = (d.d_minus + 4.0 * al * be**2 * d.u) * sn + 2.0 * be * (d.u - al * d.d_minus) * cs
    J = d.h_minus + 2.0 * al * d.j_plus
    K = (4.0 * al * be**2 * d.v - d.g_minus) * sn - 2.0 * be * (al * d.g_minus + d.v) * cs

    D = (al * d.j_minus + be**2 * d.h_plus) * sn + be * (d.j_minus - al * d.h_plus) * cs
    L = 2.0 * be * (d.u - al * d.d_minus) * sn - (d.d_minus + 4.0 * al * be**2 * d.u) * cs
    M = 2.0 * al * be**2 * d.h_minus - d.j_plus
    N = 2.0 * be * (al * d.g_minus + d.v) * sn + (4.0 * al * be**2 * d.v - d.g_minus) * cs

    pref = 2.0 * al * be * g * (p.b * p.chi) ** 2 / p.sigma**2 * e2 / den**2
    gamma = (
        g * (C * e2 + al * d.d_plus) / den
        + pref * (I - 2.0 * be * J * e2 + K * e4)
        - 0.5 * g * (al + 1.0)
    )
    shift = (
        g * (D * e2 - be * d.d_plus) / den
        + pref * (L + 2.0 * M * e2 + N * e4)
        + 0.5 * g * be
    )
    # the explicit expressions are written for c > 0; F(-c) = conj F(c)
    return gamma, math.copysign(1.0, c) * shift


def ou_quadratic_gamma(t, p: OuParams, c: float):
    return _out(_ou_quadratic_rates(t, p, c)[0])


def ou_quadratic_shift(t, p: OuParams, c: float):
    return _out(_ou_quadratic_rates(t, p, c)[1])


def ou_quadratic_rates_stationary(t, p: OuParams, c: float):
    """``(Gamma, S)`` from the dedicated ``b = 0`` expressions."""
    t = _t(t)
    d = ou_quadratic_derived(p, c)
    al, be, g = d.alpha, d.beta, p.gamma
    sn = np.sin(2.0 * be * g * t)
    cs = np.cos(2.0 * be * g * t)
    e2 = np.exp(-2.0 * al * g * t)
    theta = be * ((al - 1.0) ** 2 - 3.0)
    vartheta = al**2 * (al + 2.0) - 2.0 * (al + 1.0)
    E = 2.0 * be * sn + (be**2 - 1.0) * cs
    U = theta * sn - vartheta * cs
    V = vartheta * sn + theta * cs
    den = (al * (al + 1.0)) ** 2 - 2.0 * be**2 * E * e2 + (al * (al - 1.0)) ** 2 * e2 * e2
    gamma = g * (be**2 * U * e2 + al**3 * (al + 1.0) ** 2) / den - 0.5 * g * (al + 1.0)
    shift = g * be * (be * V * e2 - al**2 * (al + 1.0) ** 2) / den + 0.5 * g * be
    return _out(gamma), _out(math.copysign(1.0, c) * shift)


# --------------------------------------------------------------------------
# RTN, linear coupling

class Regime(enum.Enum):
    WEAK = "weak"
    STRONG = "strong"
    CRITICAL = "critical"


@dataclass(frozen=True)
class RtnDerived:
    """``kappa = sqrt(lam^2 - (c nu)^2)`` and the coupling regime.

    ``kappa`` is real in weak coupling and ``i * kappa_prime`` in strong
    coupling; ``kappa_prime`` is 0 unless the regime is strong.
    """

    kappa2: float
    kappa: complex
    kappa_prime: float
    regime: Regime


def rtn_derived(p: RtnParams, c: float) -> RtnDerived:
    k2 = p.lam**2 - (c * p.nu) ** 2
    if abs(c) < p.r:
        regime = Regime.WEAK
    elif abs(c) > p.r:
        regime = Regime.STRONG
    else:
        regime = Regime.CRITICAL
    kp = math.sqrt(-k2) if k2 < 0 else 0.0
    return RtnDerived(kappa2=k2, kappa=cmath.sqrt(k2), kappa_prime=kp, regime=regime)


def _cosh_sinhc(t: np.ndarray, k2: float, shift: float):
    """``e^{-shift t} cosh(kappa t)`` and ``e^{-shift t} sinh(kappa t)/kappa``.

    Both are entire in ``kappa^2``; a short series covers ``|kappa t| -> 0``.
    """
    z = k2 * t * t
    small = np.abs(z) < 1e-4
    series = t * (1.0 + z / 6.0 + z * z / 120.0 + z**3 / 5040.0)
    if k2 > 0:
        k = math.sqrt(k2)
        ep = np.exp((k - shift) * t)
        em = np.exp((-k - shift) * t)
        ch = 0.5 * (ep + em)
        with np.errstate(invalid="ignore"):
            sh = np.where(small, series * np.exp(-shift * t), 0.5 * (ep - em) / k)
    elif k2 < 0:
        kp = math.sqrt(-k2)
        damp = np.exp(-shift * t)
        ch = np.cos(kp * t) * damp
        sh = np.where(small, series, np.sin(kp * t) / kp) * damp
    else:
        damp = np.exp(-shift * t)
        ch = damp
        sh = t * damp
    return ch, sh


def rtn_linear_F(t, p: RtnParams, c: float):
    t = _t(t)
    k2 = p.lam**2 - (c * p.nu) ** 2
    ch, sh = _cosh_sinhc(t, k2, p.lam)
    return _out(ch + (p.lam + 1j * p.a * c * p.nu) * sh)


def rtn_linear_marginals(t, p: RtnParams, c: float):
    """Closed-form marginals ``(F(+nu, t), F(-nu, t))``."""
    t = _t(t)
    k2 = p.lam**2 - (c * p.nu) ** 2
    ch, sh = _cosh_sinhc(t, k2, p.lam)
    a, cn = p.a, c * p.nu
    fp = 0.5 * ((1 + a) * ch + (1 - a) * p.lam * sh + 1j * (1 + a) * cn * sh)
    fm = 0.5 * ((1 - a) * ch + (1 + a) * p.lam * sh - 1j * (1 - a) * cn * sh)
    return _out(fp), _out(fm)


def rtn_linear_rates(t, p: RtnParams, c: float):
    """``(Gamma, S, diverged)`` for linear RTN coupling.

    Where the denominator ``|e^{lam t} F|^2`` vanishes to relative precision
    :data:`DIVERGENCE_RTOL` the point is flagged, ``Gamma`` is ``inf`` and
    ``S`` is ``nan`` (or 0 when ``a c = 0``, where ``S`` vanishes
    identically).
    """
    t = _t(t)
    k2 = p.lam**2 - (c * p.nu) ** 2
    # rates are ratios of quadratic forms in (cosh, sinh/kappa); rescale to
    # keep both finite at large t
    scale = math.sqrt(k2) if k2 > 0 else 0.0
    ch, sh = _cosh_sinhc(t, k2, scale)
    a, cn = p.a, c * p.nu
    num = cn**2 * ((1.0 - a * a) * ch * sh + p.lam * (1.0 + a * a) * sh * sh)
    den = (ch + p.lam * sh) ** 2 + (a * cn * sh) ** 2
    ref = ch * ch + (p.lam * sh) ** 2 + (a * cn * sh) ** 2
    diverged = den <= DIVERGENCE_RTOL * ref
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(diverged, np.inf, num / den)
        if a * c == 0:
            shift = np.zeros_like(t)
        else:
            shift = np.where(diverged, np.nan, -a * cn * np.exp(-2.0 * scale * t) / den)
    return _out(gamma), _out(shift), _out(diverged)


def rtn_linear_gamma(t, p: RtnParams, c: float):
    return rtn_linear_rates(t, p, c)[0]


def rtn_linear_shift(t, p: RtnParams, c: float):
    return rtn_linear_rates(t, p, c)[1]


def _strong(p: RtnParams, c: float) -> RtnDerived:
    d = rtn_derived(p, c)
    if d.regime is not Regime.STRONG:
        raise DomainError("special time points exist only in strong coupling (|c| > lam/nu)")
    return d


def rtn_divergence_times(n, p: RtnParams, c: float):
    """Times where ``Gamma`` diverges for ``a = 0``, ``n = 1, 2, ...``."""
    n = np.asarray(n)
    if np.any(n < 1):
        raise DomainError("index n starts at 1")
    kp = _strong(p, c).kappa_prime
    return _out((n * math.pi - math.atan(kp / p.lam)) / kp)


def rtn_sign_change_times(n, p: RtnParams, c: float, a: Optional[float] = None):
    """Times where ``Gamma`` turns from positive to negative.

    For ``|a| = 1`` these are the touching zeros ``n pi / kappa'``.
    """
    n = np.asarray(n)
    if np.any(n < 1):
        raise DomainError("index n starts at 1")
    a = p.a if a is None else a
    kp = _strong(p, c).kappa_prime
    return _out((n * math.pi - math.atan(kp * (1.0 - a * a) / (p.lam * (1.0 + a * a)))) / kp)


# --------------------------------------------------------------------------
# RTN, quadratic coupling

def rtn_quadratic_F(t, p: RtnParams, c: float):
    t = _t(t)
    return _out(np.exp(1j * c * p.nu**2 * t))


def rtn_quadratic_gamma(t, p: RtnParams, c: float):
    return _out(np.zeros_like(_t(t)))


def rtn_quadratic_shift(t, p: RtnParams, c: float):
    return _out(np.full_like(_t(t), -c * p.nu**2))


def rtn_quadratic_marginals(t, p: RtnParams, c: float):
    t = _t(t)
    ph = np.exp(1j * c * p.nu**2 * t)
    e = p.a * np.exp(-2.0 * p.lam * t)
    return _out(0.5 * (1.0 + e) * ph), _out(0.5 * (1.0 - e) * ph)


# --------------------------------------------------------------------------
# dispatch

def closed_form(model: NoiseModel, coupling: Coupling, t) -> ClosedFormResult:
    """Evaluate ``F``, ``Gamma`` and ``S`` for any of the four cases."""
    t = np.atleast_1d(_t(t))
    c, k = coupling.c, coupling.k
    diverged = np.zeros(t.shape, dtype=bool)
    if isinstance(model, OuParams):
        if k == 1:
            F = ou_linear_F(t, model, c)
            gamma, shift = ou_linear_gamma(t, model, c), ou_linear_shift(t, model, c)
        else:
            F = ou_quadratic_F(t, model, c)
            gamma, shift = _ou_quadratic_rates(t, model, c)
    elif isinstance(model, RtnParams):
        if k == 1:
            F = rtn_linear_F(t, model, c)
            gamma, shift, diverged = rtn_linear_rates(t, model, c)
        else:
            F = rtn_quadratic_F(t, model, c)
            gamma, shift = rtn_quadratic_gamma(t, model, c), rtn_quadratic_shift(t, model, c)
    else:
        raise TypeError(f"unsupported noise model {type(model).__name__}")
    return ClosedFormResult(
        t=t,
        F=np.asarray(F, dtype=complex),
        gamma=np.asarray(gamma, dtype=float),
        shift=np.asarray(shift, dtype=float),
        diverged=np.asarray(diverged, dtype=bool),
    )


def steady_values(model: NoiseModel, coupling: Coupling) -> dict:
    """Long-time limits ``{"gamma_steady", "shift_steady"}``.

    Strong-coupling linear RTN oscillates forever; both entries are
    ``None`` there.
    """
    c = coupling.c
    if isinstance(model, OuParams):
        if coupling.k == 1:
            return {"gamma_steady": (c * model.sigma) ** 2 / model.gamma, "shift_steady": 0.0}
        d = ou_quadratic_derived(model, c)
        return {
            "gamma_steady": model.gamma * (d.alpha - 1.0) / 2.0,
            "shift_steady": -math.copysign(1.0, c) * model.gamma * d.beta / 2.0,
        }
    if coupling.k == 2:
        return {"gamma_steady": 0.0, "shift_steady": -c * model.nu**2}
    d = rtn_derived(model, c)
    if d.regime is Regime.STRONG:
        return {"gamma_steady": None, "shift_steady": None}
    return {
        "gamma_steady": (c * model.nu) ** 2 / (model.lam + d.kappa.real),
        "shift_steady": 0.0,
    }
