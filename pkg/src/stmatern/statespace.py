"""Block state-space assembly and simulators.

The M per-frequency companion blocks stack into one block-diagonal linear
dynamical model. Two samplers are provided: the state-space recursion
itself, and an exact-covariance sampler that factorizes the Toeplitz
covariance of each coefficient process (used as ground truth in the
simulation study).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, toeplitz

from .arma import FrequencyBlock, arma_coefficients, companion, stationary_init
from .covariance import frequency_coeffs, marginal_var, temporal_corr
from .params import SpdeParams
from .rational import RationalApprox, fit_rational
from .spectral import SpectralBasis, design_matrix

__all__ = [
    "TimeGrid",
    "BlockStateSpace",
    "assemble",
    "simulate_statespace",
    "simulate_exact",
    "field_at",
]

EXACT_SIM_MAX_STEPS = 5000


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    N: int

    def __post_init__(self):
        if self.dt <= 0 or self.N < 1:
            raise ValueError("need dt > 0 and N >= 1")

    @property
    def T(self) -> float:
        return self.N * self.dt


@dataclass(frozen=True)
class BlockStateSpace:
    """Block-diagonal model over M frequencies, blocks in basis order."""

    blocks: list[FrequencyBlock]
    basis: SpectralBasis
    params: SpdeParams
    dt: float

    @property
    def M(self) -> int:
        return len(self.blocks)

    @property
    def block_dim(self) -> int:
        return self.blocks[0].dim

    @property
    def total_dim(self) -> int:
        return sum(fb.dim for fb in self.blocks)

    @property
    def c_indices(self) -> np.ndarray:
        """Indices of the current-coefficient component of each block."""
        offsets = np.cumsum([0] + [fb.dim for fb in self.blocks[:-1]])
        return offsets

    def stationary_marginal_vars(self) -> np.ndarray:
        return np.array([fb.S_stat[0, 0] for fb in self.blocks])


def assemble(p: SpdeParams, b: SpectralBasis, ra: RationalApprox,
             grid: TimeGrid, r_t: float | None = None) -> BlockStateSpace:
    """Build all per-frequency blocks with stationary initialization.

    r_t controls the warm-up length of the covariance recursion; by default
    it is recovered from the operator parameters.
    """
    spec = frequency_coeffs(p, b)
    if r_t is None:
        r_t = p.r * p.kappa ** (-2.0 * p.alpha) * math.sqrt(8.0 * (p.gamma - 0.5))
    targets = marginal_var(spec.lambdas, spec.mus, p.gamma)
    blocks = []
    for k in range(b.M):
        try:
            ac = arma_coefficients(float(spec.mus[k]), p.gamma, grid.dt, ra)
            fb = stationary_init(companion(ac), float(targets[k]), r_t,
                                 grid.dt, freq_index=k + 1)
        except ValueError as e:
            raise ValueError(f"frequency {k + 1}: {e}") from e
        blocks.append(fb)
    return BlockStateSpace(blocks=blocks, basis=b, params=p, dt=grid.dt)


def rational_for(p: SpdeParams, m: int) -> RationalApprox:
    """Rational factor for the fractional part of gamma; exact for integers."""
    return fit_rational(p.eta, m if p.eta > 0 else 1)


def simulate_statespace(ss: BlockStateSpace, grid: TimeGrid,
                        seed: int) -> np.ndarray:
    """Sample coefficient paths from the block recursion.

    Returns shape (M, N+1) with the initial stationary draw in column 0.
    Per-frequency RNG streams are derived from (seed, k) so the result does
    not depend on execution order across frequencies.
    """
    out = np.empty((ss.M, grid.N + 1))
    for k, fb in enumerate(ss.blocks):
        rng = np.random.default_rng([seed, k])
        b = fb.dim
        a = fb.coeffs.ar_order
        L = _chol_psd(fb.S_stat)
        x = L @ rng.standard_normal(b)
        out[k, 0] = x[0]
        sig = math.sqrt(fb.sigma2)
        eps = sig * rng.standard_normal(grid.N)
        innov = np.zeros(b)
        for n in range(1, grid.N + 1):
            x = fb.F @ x
            innov[0] = eps[n - 1]
            if fb.coeffs.ma_order > 0:
                innov[a] = eps[n - 1]
            x = x + innov
            out[k, n] = x[0]
    return out


def _chol_psd(S: np.ndarray, max_tries: int = 6) -> np.ndarray:
    """Lower Cholesky factor with escalating diagonal jitter."""
    jitter = 0.0
    scale = float(np.max(np.abs(np.diag(S)))) or 1.0
    for i in range(max_tries):
        try:
            return cholesky(S + jitter * np.eye(S.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = scale * 10.0 ** (-14 + 2 * i)
    raise np.linalg.LinAlgError("covariance factorization failed at max jitter")


def simulate_exact(p: SpdeParams, b: SpectralBasis, grid: TimeGrid,
                   seed: int) -> np.ndarray:
    """Sample coefficient paths from the exact stationary covariance.

    For each frequency the (N+1) x (N+1) Toeplitz covariance over the time
    grid is built from the quadrature covariance and factorized. Dense, so
    guarded to moderate N.
    """
    if grid.N > EXACT_SIM_MAX_STEPS:
        raise ValueError(f"exact sampler limited to N <= {EXACT_SIM_MAX_STEPS}")
    spec = frequency_coeffs(p, b)
    lags = grid.dt * np.arange(grid.N + 1)
    corr = np.atleast_2d(temporal_corr(spec.mus, p.gamma, lags))
    var = marginal_var(spec.lambdas, spec.mus, p.gamma)
    out = np.empty((b.M, grid.N + 1))
    for k in range(b.M):
        cov = var[k] * toeplitz(corr[k])
        L = _chol_psd(cov)
        rng = np.random.default_rng([seed, k])
        out[k] = L @ rng.standard_normal(grid.N + 1)
    return out


def field_at(c_paths: np.ndarray, b: SpectralBasis, locs) -> np.ndarray:
    """Evaluate the truncated field at locations: shape (n_locs, n_times)."""
    H = design_matrix(b, locs)
    return H @ c_paths


def paths_csv(c_paths: np.ndarray, dt: float) -> str:
    """Long-format (k, time, value) dump of coefficient paths."""
    buf = io.StringIO()
    buf.write("k,time,value\n")
    M, n = c_paths.shape
    for k in range(M):
        for i in range(n):
            buf.write(f"{k + 1},{i * dt!r},{float(c_paths[k, i])!r}\n")
    return buf.getvalue()
