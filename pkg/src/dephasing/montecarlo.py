"""Trajectory-ensemble estimates of the decoherence function.

Each trajectory contributes the unit-modulus phase ``exp(i c int_0^t x^k)``;
the ensemble mean and the standard errors of its real and imaginary parts
are reported on the requested output grid.

Trajectories are processed in fixed-size blocks. Block ``j`` draws from its
own Philox stream keyed by ``(seed, j)``, and the per-block sums are combined
in block order, so the result is bitwise identical for any thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from .errors import DomainError
from .noise import (
    Coupling,
    NoiseModel,
    OuParams,
    RtnParams,
    ou_exact_step,
    ou_initial_draw,
    rtn_advance,
    rtn_initial_draw,
)

__all__ = ["EnsembleSpec", "McTrace", "estimate_F", "estimate_marginals_rtn", "BLOCK_SIZE"]

# trajectories per RNG stream; part of the determinism contract
BLOCK_SIZE = 16384


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble controls: size, seed, output grid and OU phase substeps."""

    n_traj: int
    seed: int
    sample_times: np.ndarray = field(repr=False)
    ou_substeps: int = 16

    def __post_init__(self):
        if isinstance(self.n_traj, bool) or int(self.n_traj) != self.n_traj or self.n_traj < 100:
            raise DomainError(f"n_traj must be an integer >= 100, got {self.n_traj}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must fit in 64 unsigned bits")
        if int(self.ou_substeps) != self.ou_substeps or self.ou_substeps < 4:
            raise DomainError(f"ou_substeps must be an integer >= 4, got {self.ou_substeps}")
        t = np.asarray(self.sample_times, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise DomainError("sample_times must be strictly increasing and start at 0")
        object.__setattr__(self, "n_traj", int(self.n_traj))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "ou_substeps", int(self.ou_substeps))
        t.setflags(write=False)
        object.__setattr__(self, "sample_times", t)


@dataclass
class McTrace:
    """Ensemble mean ``F`` with standard errors of its real and imaginary parts."""

    times: np.ndarray
    F: np.ndarray
    se_re: np.ndarray
    se_im: np.ndarray
    n_traj: int


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _phases_ou(p: OuParams, coupling: Coupling, times, substeps, rng, n):
    """Phase of every trajectory at every output time, shape ``(n, m)``."""
    c, k = coupling.c, coupling.k
    out = np.zeros((n, times.size))
    x = ou_initial_draw(p, rng, n)
    phi = np.zeros(n)
    xk = x**k
    for j, dt in enumerate(np.diff(times)):
        h = dt / substeps
        for _ in range(substeps):
            x = ou_exact_step(x, h, p, rng.standard_normal(n))
            xk_new = x**k
            phi += 0.5 * c * h * (xk + xk_new)
            xk = xk_new
        out[:, j + 1] = phi
    return out, None


def _phases_rtn(p: RtnParams, coupling: Coupling, times, rng, n):
    """Exact RTN phases from switch times; also returns the signs at each time."""
    c = coupling.c
    out = np.zeros((n, times.size))
    signs_out = np.empty((n, times.size), dtype=np.int8)
    signs = rtn_initial_draw(p, rng, n)
    signs_out[:, 0] = signs
    phi = np.zeros(n)
    for j, dt in enumerate(np.diff(times)):
        if coupling.k == 1:
            occ, _ = rtn_advance(signs, dt, p, rng)
            phi += c * p.nu * occ
        else:
            rtn_advance(signs, dt, p, rng)
            phi += c * p.nu**2 * dt
        out[:, j + 1] = phi
        signs_out[:, j + 1] = signs
    return out, signs_out


def _moment_sums(phi: np.ndarray, weights=None) -> np.ndarray:
    """Sums of cos, sin, cos^2 and sin^2 over trajectories, shape ``(4, m)``."""
    cs, sn = np.cos(phi), np.sin(phi)
    if weights is not None:
        cs, sn = cs * weights, sn * weights
    return np.stack([cs.sum(axis=0), sn.sum(axis=0), (cs * cs).sum(axis=0), (sn * sn).sum(axis=0)])


def _run_blocks(spec: EnsembleSpec, work: Callable[[np.random.Generator, int], Tuple], threads):
    n_blocks = -(-spec.n_traj // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, spec.n_traj - j * BLOCK_SIZE) for j in range(n_blocks)]

    def one(j):
        return work(_block_rng(spec.seed, j), sizes[j])

    threads = max(1, int(threads))
    if threads == 1 or n_blocks == 1:
        results = [one(j) for j in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_blocks)))
    # fixed-order reduction keeps the result independent of scheduling
    total = results[0]
    for r in results[1:]:
        total = tuple(a + b for a, b in zip(total, r))
    return total


def _finish(times, sums: np.ndarray, n: int) -> McTrace:
    mean_re, mean_im = sums[0] / n, sums[1] / n
    var_re = np.maximum(sums[2] / n - mean_re**2, 0.0) * n / (n - 1)
    var_im = np.maximum(sums[3] / n - mean_im**2, 0.0) * n / (n - 1)
    return McTrace(
        times=times.copy(),
        F=mean_re + 1j * mean_im,
        se_re=np.sqrt(var_re / n),
        se_im=np.sqrt(var_im / n),
        n_traj=n,
    )


def estimate_F(model: NoiseModel, coupling: Coupling, spec: EnsembleSpec, threads: int = 1) -> McTrace:
    """Monte Carlo estimate of ``F(t) = <exp(i c int_0^t x^k)>``.

    OU phases use the trapezoid rule over ``ou_substeps`` exact-kernel steps
    per output interval. RTN phases are exact: the linear integrand is
    piecewise constant between switches, and for ``k = 2`` the phase is the
    deterministic ``c nu^2 t`` on every trajectory.
    """
    times = spec.sample_times
    if isinstance(model, RtnParams) and coupling.k == 2:
        F = np.exp(1j * coupling.c * model.nu**2 * times)
        zero = np.zeros(times.size)
        return McTrace(times=times.copy(), F=F, se_re=zero, se_im=zero.copy(), n_traj=spec.n_traj)

    if isinstance(model, OuParams):
        def work(rng, n):
            phi, _ = _phases_ou(model, coupling, times, spec.ou_substeps, rng, n)
            return (_moment_sums(phi),)
    elif isinstance(model, RtnParams):
        def work(rng, n):
            phi, _ = _phases_rtn(model, coupling, times, rng, n)
            return (_moment_sums(phi),)
    else:
        raise DomainError(f"unsupported noise model {type(model).__name__}")

    (sums,) = _run_blocks(spec, work, threads)
    return _finish(times, sums, spec.n_traj)


def estimate_marginals_rtn(
    model: RtnParams, coupling: Coupling, spec: EnsembleSpec, threads: int = 1
) -> Tuple[McTrace, McTrace]:
    """Conditional averages ``<e^{i phi(t)} 1[x(t) = +nu]>`` and ``... = -nu``.

    The two traces sum to the estimate of ``F(t)``.
    """
    if not isinstance(model, RtnParams):
        raise DomainError("marginal estimates are defined for RTN only")
    times = spec.sample_times

    def work(rng, n):
        phi, signs = _phases_rtn(model, coupling, times, rng, n)
        plus = (signs > 0).astype(float)
        return (_moment_sums(phi, plus), _moment_sums(phi, 1.0 - plus))

    s_plus, s_minus = _run_blocks(spec, work, threads)
    n = spec.n_traj
    return _finish(times, s_plus, n), _finish(times, s_minus, n)
