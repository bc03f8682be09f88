"""Per-frequency spectral coefficients and the stationary covariance.

The temporal covariance of each spectral coefficient process is

    C(h) = lam * exp(-mu|h|) / ((2 mu)^(2 gamma - 1) Gamma(gamma)^2)
           * int_0^inf (u + 2 mu |h|)^(gamma-1) u^(gamma-1) e^-u du,

evaluated by generalized Gauss-Laguerre quadrature with the u^(gamma-1) e^-u
factor as the weight. At h = 0 the integral is Gamma(2 gamma - 1) and the
closed form is used; at gamma = 1 the kernel is exactly exponential.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammaln, roots_genlaguerre

from .params import SpdeParams
from .spectral import SpectralBasis, design_matrix

__all__ = [
    "FrequencySpectrum",
    "frequency_coeffs",
    "temporal_cov",
    "temporal_corr",
    "marginal_var",
    "normalization_constant",
    "space_time_cov",
]

QUAD_NODES = 128
QUAD_RTOL = 1e-9


@dataclass(frozen=True)
class FrequencySpectrum:
    """Eigenvalues of the temporal drift (mus) and noise (lambdas) operators."""

    mus: np.ndarray
    lambdas: np.ndarray
    gamma: float


def frequency_coeffs(p: SpdeParams, b: SpectralBasis) -> FrequencySpectrum:
    base = p.kappa ** 2 + b.xis
    mus = base ** p.alpha / p.r
    lambdas = p.C * p.sigma ** 2 * p.r ** (-2.0 * p.gamma) * base ** (-p.beta)
    return FrequencySpectrum(mus=mus, lambdas=lambdas, gamma=p.gamma)


@lru_cache(maxsize=32)
def _laguerre_rule(n: int, gamma: float):
    # weight u^(gamma-1) e^-u on (0, inf)
    x, w = roots_genlaguerre(n, gamma - 1.0)
    return x, w


def _corr_integral(mu, gamma: float, h, n_nodes: int = QUAD_NODES):
    """int_0^inf (u + 2 mu |h|)^(gamma-1) u^(gamma-1) e^-u du / Gamma(2g-1).

    Broadcasts over mu and h. Equals 1 at h = 0.
    """
    a = 2.0 * np.abs(np.multiply.outer(np.asarray(mu, dtype=float),
                                       np.asarray(h, dtype=float)))
    if gamma == 1.0:
        return np.ones_like(a)
    x, w = _laguerre_rule(n_nodes, gamma)
    val = np.einsum("...q,q->...", (a[..., None] + x) ** (gamma - 1.0), w)
    val = val * math.exp(-gammaln(2.0 * gamma - 1.0))
    # the h = 0 integral is Gamma(2 gamma - 1) analytically
    return np.where(a == 0.0, 1.0, val)


def _corr_integral_adaptive(mu: float, gamma: float, h: float) -> float:
    a = 2.0 * mu * abs(h)
    f = lambda u: (u + a) ** (gamma - 1.0) * u ** (gamma - 1.0) * math.exp(-u)
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=500)
    return val * math.exp(-gammaln(2.0 * gamma - 1.0))


def temporal_corr(mu, gamma: float, h) -> np.ndarray | float:
    """Stationary correlation of a coefficient process; rho(0) = 1 exactly.

    Even in h. Falls back to adaptive quadrature where the fixed rule has
    not converged (checked by doubling the node count).
    """
    if gamma <= 0.5:
        raise ValueError("gamma must be > 1/2")
    mu_arr = np.asarray(mu, dtype=float)
    h_arr = np.asarray(h, dtype=float)
    decay = np.exp(-np.abs(np.multiply.outer(mu_arr, h_arr)))
    if gamma == round(gamma):
        # integer gamma: the integrand is a polynomial, the rule is exact
        core = _corr_integral(mu_arr, gamma, h_arr)
    else:
        core = _corr_integral(mu_arr, gamma, h_arr, QUAD_NODES)
        check = _corr_integral(mu_arr, gamma, h_arr, 2 * QUAD_NODES)
        bad = np.abs(core - check) > QUAD_RTOL * np.abs(check)
        if np.any(bad):
            flat_mu = np.broadcast_to(mu_arr[..., None] if h_arr.ndim else mu_arr,
                                      bad.shape)
            flat_h = np.broadcast_to(h_arr, bad.shape)
            check = np.array(check, copy=True)
            for idx in np.argwhere(bad):
                key = tuple(idx)
                check[key] = _corr_integral_adaptive(
                    float(flat_mu[key]), gamma, float(flat_h[key]))
        core = check
    out = decay * core
    if np.isscalar(mu) and np.isscalar(h):
        return float(out)
    return out


def marginal_var(lam, mu, gamma: float):
    """Stationary variance lam * Gamma(2g-1) / ((2 mu)^(2g-1) Gamma(g)^2)."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    logv = (np.log(lam) + gammaln(2.0 * gamma - 1.0)
            - (2.0 * gamma - 1.0) * np.log(2.0 * mu) - 2.0 * gammaln(gamma))
    out = np.exp(logv)
    return float(out) if out.ndim == 0 else out


def spectrum_marginal_var(spec: FrequencySpectrum, k: int) -> float:
    """Stationary variance of coefficient process k (1-based index)."""
    return float(marginal_var(spec.lambdas[k - 1], spec.mus[k - 1], spec.gamma))


def temporal_cov(mu, lam, gamma: float, h):
    """Stationary temporal covariance, marginal_var(...) * temporal_corr(...)."""
    var = marginal_var(lam, mu, gamma)
    corr = temporal_corr(mu, gamma, h)
    if np.ndim(var) > 0 and np.ndim(corr) > np.ndim(var):
        var = np.asarray(var)[..., None]
    out = np.asarray(var) * corr
    if np.isscalar(mu) and np.isscalar(h):
        return float(out)
    return out


def normalization_constant(p: SpdeParams, b: SpectralBasis) -> float:
    """C such that the domain-averaged truncated stationary variance is sigma^2.

    The bounded-domain marginal variance varies in space; by orthonormality
    its domain average is sum_k C_k(0) / |D|, which is linear in C.
    """
    ref = SpdeParams(gamma=p.gamma, alpha=p.alpha, beta=p.beta, kappa=p.kappa,
                     r=p.r, C=1.0, sigma=p.sigma, sigma_obs=p.sigma_obs)
    spec = frequency_coeffs(ref, b)
    avg_var = float(np.sum(marginal_var(spec.lambdas, spec.mus, p.gamma)))
    avg_var /= b.domain.volume
    return p.sigma ** 2 / avg_var


def with_normalization(p: SpdeParams, b: SpectralBasis) -> SpdeParams:
    """Copy of p with C set by normalization_constant for basis b."""
    C = normalization_constant(p, b)
    return SpdeParams(gamma=p.gamma, alpha=p.alpha, beta=p.beta, kappa=p.kappa,
                      r=p.r, C=C, sigma=p.sigma, sigma_obs=p.sigma_obs)


def space_time_cov(b: SpectralBasis, spec: FrequencySpectrum, s1, s2, h) -> float:
    """Truncated covariance sum_k C_k(h) f_k(s1) f_k(s2)."""
    f1 = design_matrix(b, np.atleast_2d(np.asarray(s1, dtype=float)))[0]
    f2 = design_matrix(b, np.atleast_2d(np.asarray(s2, dtype=float)))[0]
    ck = temporal_cov(spec.mus, spec.lambdas, spec.gamma, float(h))
    return float(np.sum(ck * f1 * f2))


def covariance_curve_csv(mu: float, lam: float, gamma: float, lags) -> str:
    """(lag, covariance) dump for plotting."""
    buf = io.StringIO()
    buf.write("lag,value\n")
    for h in lags:
        buf.write(f"{float(h)!r},{temporal_cov(mu, lam, gamma, float(h))!r}\n")
    return buf.getvalue()
