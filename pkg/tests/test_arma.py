import math

import numpy as np
import pytest

from stmatern.arma import (arma_acvf, arma_coefficients, companion,
                           frac_ma_weights, stationary_init)
from stmatern.rational import fit_rational


def convolution_phi_theta(p, q, fg, c):
    """Oracle: expand p(cB)(1 - cB)^fg and q(cB) directly."""
    binomial = np.array([math.comb(fg, j) * (-1.0) ** j for j in range(fg + 1)])
    ar_poly = np.convolve(p, binomial)  # coefficients of B^i before scaling
    powers = c ** np.arange(len(ar_poly))
    ar_poly = ar_poly * powers / ar_poly[0] / (c ** 0)
    phi = -ar_poly[1:] / ar_poly[0]
    theta = (q * c ** np.arange(len(q)) / q[0])[1:]
    return phi, theta


def test_phi_theta_match_convolution_oracle():
    rng = np.random.default_rng(11)
    for m in range(4):
        for fg in range(4):
            if m == 0 and fg == 0:
                continue
            p = np.concatenate([[1.0], rng.uniform(-0.5, 0.5, m)])
            q = np.concatenate([[1.0], rng.uniform(-0.5, 0.5, m)])
            ra = fit_rational(0.6, max(m, 1))
            ra = type(ra)(m=max(m, 1), eta=0.6, p_coeffs=p, q_coeffs=q,
                          grid_error=0.0)
            mu_dt = rng.uniform(0.01, 2.0)
            ac = arma_coefficients(mu_dt, fg + 0.6, 1.0, ra)
            phi_o, theta_o = convolution_phi_theta(p, q, fg, math.exp(-mu_dt))
            assert np.allclose(ac.phi, phi_o, atol=1e-12)
            assert np.allclose(ac.theta, theta_o, atol=1e-12)


def test_ar1_exact_correlation():
    # gamma = 1, m = 0 (constant rational factor): exact AR(1)
    ra = fit_rational(0.0, 1)
    mu, dt = 0.8, 0.1
    ac = arma_coefficients(mu, 1.0, dt, ra)
    assert len(ac.phi) == 1 and len(ac.theta) == 0
    assert ac.phi[0] == pytest.approx(math.exp(-mu * dt), abs=1e-15)
    acvf = arma_acvf(ac, 100)
    rho = acvf / acvf[0]
    n = np.arange(101)
    assert np.max(np.abs(rho - np.exp(-mu * dt * n))) < 1e-10


def test_integer_gamma_two_binomial():
    ra = fit_rational(0.0, 1)
    mu, dt = 0.5, 0.2
    ac = arma_coefficients(mu, 2.0, dt, ra)
    c = math.exp(-mu * dt)
    assert np.allclose(ac.phi, [2.0 * c, -c * c], atol=1e-14)


def test_eta_mismatch_rejected():
    ra = fit_rational(0.5, 2)
    with pytest.raises(ValueError):
        arma_coefficients(1.0, 1.25, 0.1, ra)  # eta 0.25 != 0.5
    with pytest.raises(ValueError):
        arma_coefficients(1.0, 0.4, 0.1, ra)  # gamma <= 1/2


def test_companion_structure():
    ra = fit_rational(0.5, 2)
    ac = arma_coefficients(1.0, 1.5, 0.05, ra)
    fb = companion(ac)
    a, m = ac.ar_order, ac.ma_order
    assert (a, m) == (3, 2)
    assert fb.dim == 5
    assert np.allclose(fb.F[0, :a], ac.phi)
    assert np.allclose(fb.F[0, a:], ac.theta)
    # shift identities below the first row
    assert fb.F[1, 0] == 1.0 and fb.F[2, 1] == 1.0 and fb.F[4, 3] == 1.0
    # innovation enters at the current coefficient and current epsilon
    nz = np.argwhere(fb.Sigma != 0)
    assert set(map(tuple, nz)) == {(0, 0), (0, a), (a, 0), (a, a)}


def test_stationary_init_matches_ar1_formula():
    ra = fit_rational(0.0, 1)
    ac = arma_coefficients(1.0, 1.0, 0.1, ra)
    target = 2.3
    fb = stationary_init(companion(ac), target, r_t=1.0, dt=0.1)
    phi = ac.phi[0]
    assert fb.S_stat[0, 0] == pytest.approx(target, rel=1e-12)
    assert fb.sigma2 == pytest.approx(target * (1.0 - phi ** 2), rel=1e-10)


def test_stationary_init_rejects_explosive():
    ra = fit_rational(0.0, 1)
    ac = arma_coefficients(1.0, 1.0, 0.1, ra)
    bad = type(ac)(phi=np.array([1.01]), theta=ac.theta, sigma2=1.0,
                   mu=ac.mu, gamma=ac.gamma, dt=ac.dt)
    with pytest.raises(ValueError, match="non-stationary"):
        stationary_init(companion(bad), 1.0, r_t=1.0, dt=0.1)


def test_acvf_positive_definite_sequence():
    ra = fit_rational(0.5, 3)
    ac = arma_coefficients(1.0, 1.5, 0.05, ra)
    acvf = arma_acvf(ac, 60)
    from scipy.linalg import toeplitz
    eig = np.linalg.eigvalsh(toeplitz(acvf))
    assert np.all(eig > -1e-10 * acvf[0])


def test_frac_ma_weights_reference():
    w = frac_ma_weights(0.0 + 1e-12, 0.75, 1.0, 2)
    # (-1)^n binom(-0.75, n): 1, 0.75, 0.65625
    assert np.allclose(w, [1.0, 0.75, 0.65625], atol=1e-9)
    with pytest.raises(ValueError):
        frac_ma_weights(1.0, 0.5, 1.0, 5)


def test_lemma_oracle_agreement():
    # fractional-difference MA oracle vs ARMA acvf at high rational order
    dt, mu = 0.05, 1.0
    for gamma in (0.75, 1.25):
        ra = fit_rational(gamma - math.floor(gamma), 3)
        ac = arma_coefficients(mu, gamma, dt, ra)
        acvf = arma_acvf(ac, 60)
        rho = acvf / acvf[0]
        w = frac_ma_weights(mu, gamma, dt, 6000)
        ref = np.array([w[: len(w) - h] @ w[h:] for h in range(61)])
        ref = ref / ref[0]
        assert np.max(np.abs(rho - ref)) < 0.05
