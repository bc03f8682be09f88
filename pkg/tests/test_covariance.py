import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as gamma_fn

from stmatern.covariance import (frequency_coeffs, marginal_var,
                                 normalization_constant, space_time_cov,
                                 temporal_corr, temporal_cov,
                                 with_normalization)
from stmatern.params import NaturalParams, SpdeParams, to_spde
from stmatern.spectral import RectangleDomain, build_basis


def brute_force_corr(mu, gamma, h):
    a = 2.0 * mu * abs(h)
    f = lambda u: (u + a) ** (gamma - 1.0) * u ** (gamma - 1.0) * math.exp(-u)
    val, _ = integrate.quad(f, 0.0, np.inf, epsrel=1e-13, limit=500)
    return math.exp(-mu * abs(h)) * val / gamma_fn(2.0 * gamma - 1.0)


def test_gamma_one_exponential():
    for mu in (0.1, 1.0, 10.0):
        for h in (0.0, 0.5, 1.0, 5.0):
            got = temporal_cov(mu, 2.0, 1.0, h)
            want = 2.0 * math.exp(-mu * h) / (2.0 * mu)
            assert got == pytest.approx(want, rel=1e-12)


def test_h_zero_closed_form():
    for gamma in (0.75, 1.0, 1.3, 1.5, 2.0, 2.7):
        for mu in (0.2, 1.0, 5.0):
            lam = 1.7
            want = (lam * gamma_fn(2.0 * gamma - 1.0)
                    / ((2.0 * mu) ** (2.0 * gamma - 1.0) * gamma_fn(gamma) ** 2))
            assert temporal_cov(mu, lam, gamma, 0.0) == pytest.approx(
                want, rel=1e-12)
            assert temporal_corr(mu, gamma, 0.0) == 1.0


def test_quadrature_against_adaptive_oracle():
    rng = np.random.default_rng(3)
    for _ in range(25):
        mu = rng.uniform(0.05, 8.0)
        gamma = rng.uniform(0.55, 3.2)
        h = rng.uniform(0.0, 6.0)
        got = temporal_corr(mu, gamma, h)
        assert got == pytest.approx(brute_force_corr(mu, gamma, h), rel=1e-8)


def test_correlation_properties():
    mus = np.array([0.3, 1.0, 4.0])
    h = np.linspace(0.0, 10.0, 40)
    rho = temporal_corr(mus, 1.4, h)
    assert rho.shape == (3, 40)
    assert np.allclose(rho[:, 0], 1.0)
    assert np.all(rho <= 1.0 + 1e-12)
    assert np.all(np.diff(rho, axis=1) <= 1e-12)  # monotone decay
    # even in h
    assert np.allclose(temporal_corr(mus, 1.4, -h), rho)


def test_frequency_coeffs_formulas():
    p = SpdeParams(gamma=1.5, alpha=0.25, beta=1.5, kappa=2.0, r=3.0,
                   C=0.7, sigma=2.0, sigma_obs=0.1)
    b = build_basis(RectangleDomain(2, (1.0, 1.0)), 10)
    spec = frequency_coeffs(p, b)
    base = p.kappa ** 2 + b.xis
    assert np.allclose(spec.mus, base ** 0.25 / 3.0)
    assert np.allclose(spec.lambdas, 0.7 * 4.0 * 3.0 ** -3.0 * base ** -1.5)


def test_marginal_var_vectorized():
    lam = np.array([1.0, 2.0])
    mu = np.array([0.5, 3.0])
    v = marginal_var(lam, mu, 1.25)
    for i in range(2):
        want = (lam[i] * gamma_fn(1.5)
                / ((2 * mu[i]) ** 1.5 * gamma_fn(1.25) ** 2))
        assert v[i] == pytest.approx(want, rel=1e-12)


def test_normalization_single_frequency():
    # one-term sum: C solves the h=0 closed form exactly
    b = build_basis(RectangleDomain(1, (1.0,)), 1)
    p = SpdeParams(gamma=1.5, alpha=0.25, beta=1.5, kappa=2.0, r=3.0,
                   C=1.0, sigma=2.0, sigma_obs=0.1)
    C = normalization_constant(p, b)
    spec = frequency_coeffs(with_normalization(p, b), b)
    var = marginal_var(spec.lambdas, spec.mus, p.gamma)
    assert var[0] == pytest.approx(p.sigma ** 2, rel=1e-12)
    assert C > 0


def test_normalization_domain_average():
    dom = RectangleDomain(2, (1.0, 1.0))
    b = build_basis(dom, 64)
    nat = NaturalParams(nu_t=1.0, nu_s=1.0, r_t=10.0, r_s=1.0,
                        beta_sep=0.25, sigma=3.5, sigma_obs=0.35)
    sp = with_normalization(to_spde(nat, 2), b)
    spec = frequency_coeffs(sp, b)
    total = float(np.sum(marginal_var(spec.lambdas, spec.mus, sp.gamma)))
    assert total / dom.volume == pytest.approx(3.5 ** 2, rel=1e-12)
    # domain-averaged pointwise variance agrees (orthonormal basis)
    grid = np.linspace(0.0, 1.0, 41)
    X, Y = np.meshgrid(grid, grid)
    locs = np.column_stack([X.ravel(), Y.ravel()])
    from stmatern.spectral import design_matrix
    H = design_matrix(b, locs)
    vars_pt = (H ** 2) @ marginal_var(spec.lambdas, spec.mus, sp.gamma)
    assert np.mean(vars_pt) == pytest.approx(3.5 ** 2, rel=0.05)


def test_space_time_cov_symmetry():
    dom = RectangleDomain(2, (1.0, 1.0))
    b = build_basis(dom, 36)
    nat = NaturalParams(nu_t=1.0, nu_s=1.0, r_t=5.0, r_s=0.5,
                        beta_sep=0.5, sigma=1.0, sigma_obs=0.1)
    sp = with_normalization(to_spde(nat, 2), b)
    spec = frequency_coeffs(sp, b)
    s1, s2 = [0.2, 0.3], [0.7, 0.6]
    c12 = space_time_cov(b, spec, s1, s2, 1.5)
    c21 = space_time_cov(b, spec, s2, s1, 1.5)
    assert c12 == pytest.approx(c21, rel=1e-12)
    assert space_time_cov(b, spec, s1, s1, 0.0) > abs(c12)
