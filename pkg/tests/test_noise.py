import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from dephasing.errors import DomainError
from dephasing.noise import (
    Coupling,
    DeltaDensity,
    NoisePath,
    OuParams,
    RtnParams,
    ou_exact_step,
    ou_mean,
    ou_ordered_cumulant,
    ou_second_moment,
    ou_single_point_density,
    ou_transition_density,
    ou_variance,
    rtn_advance,
    rtn_initial_draw,
    rtn_mean,
    rtn_second_moment,
    rtn_single_point,
    rtn_transition_prob,
    sample_ou_ensemble,
    sample_ou_path,
    sample_rtn_path,
)


# --- construction -----------------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [dict(gamma=0, sigma=1), dict(gamma=1, sigma=-1), dict(gamma=1, sigma=1, b=1.0),
     dict(gamma=1, sigma=1, b=-1.2), dict(gamma=1, sigma=1, chi=float("nan"))],
)
def test_ou_params_rejects_invalid(kwargs):
    with pytest.raises(DomainError):
        OuParams(**kwargs)


@pytest.mark.parametrize("kwargs", [dict(lam=0, nu=1), dict(lam=1, nu=0), dict(lam=1, nu=1, a=1.01)])
def test_rtn_params_rejects_invalid(kwargs):
    with pytest.raises(DomainError):
        RtnParams(**kwargs)


def test_rtn_ratio_and_bounds():
    p = RtnParams(2.0, 4.0, a=-1.0)
    assert p.r == 0.5
    with pytest.raises(Exception):
        p.lam = 3.0


@pytest.mark.parametrize("c,k", [(0.0, 1), (1.0, 3), (1.0, 0), (1.0, True), (float("inf"), 1)])
def test_coupling_rejects_invalid(c, k):
    with pytest.raises(DomainError):
        Coupling(c, k)


def test_noise_path_validation():
    with pytest.raises(DomainError):
        NoisePath([0.1, 0.2], [1, 1])
    with pytest.raises(DomainError):
        NoisePath([0.0, 0.0], [1, 1])


# --- OU laws -----------------------------------------------------------------

def test_ou_transition_density_degenerate_and_order():
    p = OuParams(1.0, 2.0)
    assert ou_transition_density(0.3, 1.0, 0.5, 1.0, p) == DeltaDensity(0.5)
    with pytest.raises(DomainError):
        ou_transition_density(0.0, 0.5, 0.0, 1.0, p)


def test_ou_transition_density_relaxes_and_normalises():
    p = OuParams(1.0, 2.0)
    far = ou_transition_density(0.0, 60.0, 3.0, 0.0, p)
    assert far == pytest.approx(1 / math.sqrt(2 * math.pi * 4.0), rel=1e-12)
    val, _ = integrate.quad(lambda x: ou_transition_density(x, 0.7, 1.0, 0.0, p), -40, 40, epsabs=1e-13)
    assert abs(val - 1) < 1e-10


def test_ou_exact_step_moments(rng):
    # mean e^{-0.7}, variance 4 (1 - e^{-1.4}) from x0 = 1
    p = OuParams(1.0, 2.0)
    n = 10**6
    x = ou_exact_step(np.ones(n), 0.7, p, rng.standard_normal(n))
    var = 4 * (1 - math.exp(-1.4))
    assert abs(x.mean() - math.exp(-0.7)) < 4 * math.sqrt(var / n)
    assert abs(x.var() - var) < 4 * var * math.sqrt(2 / n)


def test_ou_single_point_law():
    p = OuParams(1.0, 2.0, b=0.5, chi=1.0)
    assert ou_mean(0.0, p) == 0.5 and ou_variance(0.0, p) == pytest.approx(4 * 0.75)
    assert ou_mean(2.0, p) == pytest.approx(0.5 * math.exp(-2))
    stat = OuParams(1.0, 2.0)
    xs = np.linspace(-3, 3, 7)
    for t in (0.0, 1.0, 5.0):
        np.testing.assert_allclose(ou_single_point_density(xs, t, stat), stats.norm.pdf(xs, 0, 2), rtol=1e-13)


def test_ou_cumulant_identities():
    p = OuParams(1.3, 0.7, b=0.6, chi=-0.4)
    t = np.linspace(0, 3, 7)
    np.testing.assert_allclose(ou_ordered_cumulant(t, t, p), ou_variance(t, p), rtol=1e-14)
    np.testing.assert_allclose(
        ou_second_moment(t + 0.3, t, p) - ou_mean(t + 0.3, p) * ou_mean(t, p),
        ou_ordered_cumulant(t + 0.3, t, p),
        rtol=1e-12, atol=1e-15,
    )
    s = OuParams(1.3, 0.7)
    assert ou_ordered_cumulant(2.0, 0.5, s) == pytest.approx(0.49 * math.exp(-1.3 * 1.5))
    with pytest.raises(DomainError):
        ou_second_moment(0.5, 1.0, p)
    with pytest.raises(DomainError):
        ou_ordered_cumulant(0.5, 1.0, p)


def test_ou_sampler_covariance(rng):
    p = OuParams(1.0, 2.0, b=0.5, chi=1.0)
    n = 10**6
    x = sample_ou_ensemble(p, [0.0, 0.5, 1.0], rng, n)
    prod = x[:, 2] * x[:, 1]
    assert abs(prod.mean() - ou_second_moment(1.0, 0.5, p)) < 4 * prod.std() / math.sqrt(n)
    cov = prod - x[:, 2].mean() * x[:, 1].mean()
    assert abs(cov.mean() - ou_ordered_cumulant(1.0, 0.5, p)) < 4 * prod.std() / math.sqrt(n)


def test_ou_sampler_relaxes_to_stationary_variance(rng):
    p = OuParams(2.0, 1.5, b=0.9, chi=3.0)
    n = 200_000
    x = sample_ou_ensemble(p, [0.0, 10.0], rng, n)[:, -1]
    assert abs(x.var() - 2.25) < 4 * 2.25 * math.sqrt(2 / n)


def test_ou_sampler_grid_invariance(rng):
    p = OuParams(1.0, 1.0, b=0.7, chi=2.0)
    a = sample_ou_ensemble(p, [0.0, 1.0], rng, 100_000)[:, -1]
    b = sample_ou_ensemble(p, [0.0, 0.5, 1.0], rng, 100_000)[:, -1]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_sample_ou_path_single_point_and_errors(rng):
    path = sample_ou_path(OuParams(1.0, 1.0), [0.0], rng)
    assert path.values.shape == (1,)
    with pytest.raises(DomainError):
        sample_ou_path(OuParams(1.0, 1.0), [], rng)
    with pytest.raises(DomainError):
        sample_ou_path(OuParams(1.0, 1.0), [0.0, 0.5, 0.5], rng)


# --- RTN laws ---------------------------------------------------------------

def test_rtn_transition_prob():
    p = RtnParams(1.5, 2.0)
    assert rtn_transition_prob(2.0, 1.0, 2.0, 1.0, p) == 1.0
    assert rtn_transition_prob(-2.0, 1.0, 2.0, 1.0, p) == 0.0
    assert rtn_transition_prob(2.0, 50.0, -2.0, 0.0, p) == pytest.approx(0.5)
    for dt in (0.1, 1.0, 3.0):
        assert rtn_transition_prob(2.0, dt, 2.0, 0, p) + rtn_transition_prob(-2.0, dt, 2.0, 0, p) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        rtn_transition_prob(1.0, 1.0, 2.0, 0.0, p)


def test_rtn_moments():
    p = RtnParams(1.0, 2.0, a=0.8)
    assert rtn_mean(0.0, p) == pytest.approx(1.6)
    assert rtn_mean(3.0, RtnParams(1.0, 2.0)) == 0.0
    assert rtn_single_point(2.0, 0.0, p) == pytest.approx(0.9)
    assert rtn_single_point(2.0, 1.0, p) + rtn_single_point(-2.0, 1.0, p) == pytest.approx(1.0)
    vals = [rtn_second_moment(1.3, 0.4, RtnParams(1.0, 2.0, a)) for a in (-1.0, 0.0, 1.0)]
    assert vals[0] == vals[1] == vals[2]
    with pytest.raises(DomainError):
        rtn_second_moment(0.1, 0.4, p)


def test_rtn_path_structure(rng):
    p = RtnParams(2.0, 1.5, a=1.0)
    path = sample_rtn_path(p, 5.0, rng)
    assert path.values[0] == 1.5
    assert set(np.abs(path.values)) == {1.5}
    assert path.times[0] == 0.0 and path.times[-1] == 5.0
    assert np.all(np.diff(path.values[:-1]) != 0)
    with pytest.raises(DomainError):
        sample_rtn_path(p, 0.0, rng)


def test_rtn_flip_count_is_poisson(rng):
    p = RtnParams(1.3, 1.0)
    T, n = 4.0, 20_000
    counts = np.array([sample_rtn_path(p, T, rng).switch_times.size for _ in range(n)])
    assert abs(counts.mean() - p.lam * T) < 4 * math.sqrt(p.lam * T / n)


def test_rtn_advance_matches_single_point_law(rng):
    p = RtnParams(1.0, 1.0, a=0.6)
    n = 200_000
    s = rtn_initial_draw(p, rng, n)
    occ, flips = rtn_advance(s, 0.7, p, rng)
    frac = (s > 0).mean()
    expect = rtn_single_point(1.0, 0.7, p)
    assert abs(frac - expect) < 4 * math.sqrt(expect * (1 - expect) / n)
    assert np.all(np.abs(occ) <= 0.7 + 1e-12)
    assert abs(flips.mean() - 0.7) < 4 * math.sqrt(0.7 / n)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0), st.floats(0.2, 3.0))
def test_rtn_path_integral_is_exact(seed, lam, horizon):
    rng = np.random.default_rng(seed)
    p = RtnParams(lam, 0.7)
    path = sample_rtn_path(p, horizon, rng)
    # piecewise-constant integral by hand
    manual = sum(v * (t1 - t0) for v, t0, t1 in zip(path.values[:-1], path.times[:-1], path.times[1:]))
    assert path.integral(horizon) == pytest.approx(manual, abs=1e-12)
    assert path.integral(horizon, 2) == pytest.approx(0.49 * horizon, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.1, 5), st.floats(0.1, 3), st.floats(-0.99, 0.99), st.floats(-3, 3),
    st.floats(0, 5), st.floats(0, 5),
)
def test_ou_densities_nonnegative_and_normalised(g, s, b, chi, t, dt):
    p = OuParams(g, s, b, chi)
    val, _ = integrate.quad(lambda x: ou_single_point_density(x, t, p), -np.inf, np.inf, epsabs=1e-13)
    assert abs(val - 1) < 1e-8
    assert ou_variance(t, p) > 0
    assert ou_ordered_cumulant(t + dt, t, p) <= s * s + 1e-12
