"""Per-frequency ARMA approximation of the fractional temporal dynamics.

Each spectral coefficient process is approximated by an
ARMA(m + floor(gamma), m) recursion obtained by expanding

    p(e^(-mu dt) B) (1 - e^(-mu dt) B)^floor(gamma) c^n = q(e^(-mu dt) B) eps^n,

where p/q is the rational approximation of the fractional factor. The
recursion is put in companion (Markov) form, initialized in its stationary
state, and its innovation variance rescaled so the lag-0 variance matches
the analytic stationary variance.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.special import binom

from .rational import RationalApprox

__all__ = [
    "ArmaCoeffs",
    "FrequencyBlock",
    "arma_coefficients",
    "companion",
    "stationary_init",
    "arma_acvf",
    "frac_ma_weights",
]


@dataclass(frozen=True)
class ArmaCoeffs:
    """AR/MA coefficients of one frequency's recursion.

    phi has length m + floor(gamma), theta length m. sigma2 starts at 1 and
    is rescaled by the stationary initialization.
    """

    phi: np.ndarray
    theta: np.ndarray
    sigma2: float
    mu: float
    gamma: float
    dt: float

    @property
    def ar_order(self) -> int:
        return len(self.phi)

    @property
    def ma_order(self) -> int:
        return len(self.theta)

    def ar_roots(self) -> np.ndarray:
        """Roots of 1 - sum phi_i z^i (causal iff all outside unit circle)."""
        if self.ar_order == 0:
            return np.array([])
        return np.roots(np.concatenate([[1.0], -self.phi])[::-1])

    def ma_roots(self) -> np.ndarray:
        """Roots of 1 + sum theta_i z^i."""
        if self.ma_order == 0:
            return np.array([])
        return np.roots(np.concatenate([[1.0], self.theta])[::-1])


@dataclass(frozen=True)
class FrequencyBlock:
    """Companion-form block for one frequency.

    F is the (b x b) transition matrix with b = 2m + floor(gamma),
    Sigma the rank-1 innovation covariance, S_stat the rescaled stationary
    state covariance and sigma2 the rescaled innovation variance.
    """

    F: np.ndarray
    Sigma: np.ndarray
    sigma2: float
    coeffs: ArmaCoeffs
    S_stat: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.F.shape[0]


def arma_coefficients(mu: float, gamma: float, dt: float,
                      ra: RationalApprox) -> ArmaCoeffs:
    """Expand the operator polynomials into explicit AR/MA coefficients.

    Uses the closed-form expansion: with c = e^(-mu dt) and fg = floor(gamma),

        phi_i = -c^i sum_j (-1)^(i-j) binom(fg, i-j) p_j / p_0
        theta_i = c^i q_i / q_0,

    where j runs over the indices where both p_j and the binomial are
    defined (out-of-range terms vanish).
    """
    if gamma <= 0.5:
        raise ValueError("gamma must be > 1/2")
    if dt <= 0:
        raise ValueError("dt must be positive")
    eta = gamma - math.floor(gamma)
    if abs(ra.eta - eta) > 5e-6:
        raise ValueError(f"rational approximation eta={ra.eta} does not match "
                         f"gamma fractional part {eta}")
    p = np.asarray(ra.p_coeffs, dtype=float)
    q = np.asarray(ra.q_coeffs, dtype=float)
    if abs(p[0]) < 1e-10 or abs(q[0]) < 1e-10:
        raise ValueError("p(0), q(0) too close to zero")
    fg = math.floor(gamma)
    mp = len(p) - 1
    mq = len(q) - 1
    c = math.exp(-mu * dt)
    ar_order = mp + fg
    phi = np.zeros(ar_order)
    for i in range(1, ar_order + 1):
        zeta = min(max(mp, fg), i, mp + fg - i)
        j0 = max(0, i - fg)
        acc = 0.0
        for j in range(j0, j0 + zeta + 1):
            if j > mp or not (0 <= i - j <= fg):
                continue
            acc += (-1.0) ** (i - j) * binom(fg, i - j) * p[j]
        phi[i - 1] = -(c ** i) * acc / p[0]
    theta = np.array([(c ** i) * q[i] / q[0] for i in range(1, mq + 1)])
    return ArmaCoeffs(phi=phi, theta=theta, sigma2=1.0, mu=mu, gamma=gamma, dt=dt)


def companion(ac: ArmaCoeffs) -> FrequencyBlock:
    """Companion-form transition matrix and innovation covariance.

    State is (c^n, .., c^(n-a+1), eps^n, .., eps^(n-m+1)) with a = ar order
    and m = ma order, so the block dimension is a + m = 2m + floor(gamma).
    """
    a, m = ac.ar_order, ac.ma_order
    b = a + m
    if b == 0:
        raise ValueError("degenerate ARMA with no state")
    F = np.zeros((b, b))
    F[0, :a] = ac.phi
    F[0, a:] = ac.theta
    for i in range(1, a):
        F[i, i - 1] = 1.0
    for i in range(1, m):
        F[a + i, a + i - 1] = 1.0
    Sigma = np.zeros((b, b))
    idx = [0] if m == 0 else [0, a]
    for i in idx:
        for j in idx:
            Sigma[i, j] = ac.sigma2
    return FrequencyBlock(F=F, Sigma=Sigma, sigma2=ac.sigma2, coeffs=ac)


def stationary_init(fb: FrequencyBlock, target_var: float, r_t: float,
                    dt: float, n_extra: int = 0,
                    freq_index: int | None = None) -> FrequencyBlock:
    """Iterate the covariance recursion to stationarity and rescale.

    Runs S <- F S F' + Sigma from S = I for N_init = max(ceil(10 r_t / dt),
    200) steps, then sets the innovation variance so the first state
    component has variance target_var.
    """
    F, Sigma = fb.F, fb.Sigma
    n_init = max(math.ceil(10.0 * r_t / dt), 200) + n_extra
    rho = np.max(np.abs(np.linalg.eigvals(F)))
    if rho >= 1.0:
        where = "" if freq_index is None else f" (frequency {freq_index})"
        raise ValueError(f"companion matrix is non-stationary, "
                         f"spectral radius {rho:.6f}{where}")
    S = np.eye(fb.dim)
    for _ in range(n_init):
        S = F @ S @ F.T + Sigma
    if not np.all(np.isfinite(S)):
        where = "" if freq_index is None else f" (frequency {freq_index})"
        raise ValueError(f"covariance recursion diverged{where}")
    scale = target_var / S[0, 0]
    sigma2 = fb.sigma2 * scale
    S_stat = scale * S
    S_stat = 0.5 * (S_stat + S_stat.T)
    return FrequencyBlock(F=F, Sigma=scale * Sigma, sigma2=sigma2,
                          coeffs=fb.coeffs, S_stat=S_stat)


def _psi_weights(ac: ArmaCoeffs, min_len: int) -> np.ndarray:
    """MA(infinity) weights of the ARMA recursion, truncated by tail energy."""
    num = np.concatenate([[1.0], ac.theta])
    den = np.concatenate([[1.0], -ac.phi])
    n = max(min_len, 1024)
    while True:
        impulse = np.zeros(n)
        impulse[0] = 1.0
        psi = signal.lfilter(num, den, impulse)
        total = float(psi @ psi)
        tail = float(psi[-max(n // 10, 1):] @ psi[-max(n // 10, 1):])
        if tail <= 1e-14 * total or n >= 1 << 21:
            return psi
        n *= 4


def arma_acvf(ac: ArmaCoeffs, max_lag: int) -> np.ndarray:
    """Theoretical autocovariance at lags 0..max_lag via MA(infinity) truncation."""
    roots = ac.ar_roots()
    if len(roots) and np.min(np.abs(roots)) <= 1.0 + 1e-10:
        raise ValueError("non-causal ARMA: AR root on or inside the unit circle")
    psi = _psi_weights(ac, 4 * (max_lag + 1))
    n = len(psi)
    # one FFT autocorrelation instead of max_lag separate dot products
    full = signal.fftconvolve(psi, psi[::-1])
    acvf = full[n - 1:n + max_lag].copy()
    if max_lag >= n:
        acvf = np.concatenate([acvf, np.zeros(max_lag + 1 - n)])
    return ac.sigma2 * acvf


def frac_ma_weights(mu: float, gamma: float, dt: float, n_max: int) -> np.ndarray:
    """Exact fractional-difference MA weights (-1)^n binom(-gamma, n) e^(-mu n dt).

    The normalized autocovariance of these weights is an independent oracle
    for the ARMA autocovariance at high rational order.
    """
    if gamma <= 0.5:
        raise ValueError("gamma must be > 1/2")
    n = np.arange(n_max + 1)
    # (-1)^n binom(-gamma, n) = prod_{j<=n} (gamma + j - 1) / j
    ratios = np.concatenate([[1.0], (gamma + n[1:] - 1.0) / n[1:]])
    return np.cumprod(ratios) * np.exp(-mu * dt * n)


def diagnostics_csv(blocks: list[FrequencyBlock]) -> str:
    """Per-frequency diagnostics table (phi, theta, sigma2, rho(F), var)."""
    buf = io.StringIO()
    buf.write("k,phi,theta,sigma2,spectral_radius,stationary_var\n")
    for k, fb in enumerate(blocks, start=1):
        rho = float(np.max(np.abs(np.linalg.eigvals(fb.F))))
        var = float(fb.S_stat[0, 0]) if fb.S_stat is not None else float("nan")
        phi = ";".join(f"{v:.12g}" for v in fb.coeffs.phi)
        theta = ";".join(f"{v:.12g}" for v in fb.coeffs.theta)
        buf.write(f"{k},{phi},{theta},{fb.sigma2:.12g},{rho:.12g},{var:.12g}\n")
    return buf.getvalue()
