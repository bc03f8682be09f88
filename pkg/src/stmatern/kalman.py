"""Sequential Kalman filter over the block state space.

Observations within a time step are absorbed one scalar at a time; each
rank-1 update costs O(total state dim squared), which keeps the per-step
cost at O(M^2 n_obs) and equals the joint Kalman update exactly. The
Gaussian log-likelihood accumulates the scalar predictive densities.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import design_matrix
from .statespace import BlockStateSpace

__all__ = [
    "ObservationSet",
    "FilterOutput",
    "predict_step",
    "sequential_update",
    "run_filter",
    "forecast",
]


@dataclass(frozen=True)
class ObservationSet:
    """Time-indexed spatial observations with missingness.

    values has shape (N, n_s); NaN marks a missing (station, step) pair.
    covariates, when present, is a static (n_s, p) matrix of full column
    rank. Step n = 1..N corresponds to row n-1.
    """

    locations: np.ndarray
    values: np.ndarray
    covariates: np.ndarray | None = None

    def __post_init__(self):
        locs = np.atleast_2d(np.asarray(self.locations, dtype=float))
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "values", vals)
        if vals.shape[1] != locs.shape[0]:
            raise ValueError("values must have one column per location")
        if np.any(np.isinf(vals)):
            raise ValueError("observed values must be finite or NaN")
        if self.covariates is not None:
            G = np.atleast_2d(np.asarray(self.covariates, dtype=float))
            object.__setattr__(self, "covariates", G)
            if G.shape[0] != locs.shape[0]:
                raise ValueError("covariates must have one row per location")
            if np.linalg.matrix_rank(G) < G.shape[1]:
                raise ValueError("covariate matrix is rank deficient")

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_locations(self) -> int:
        return self.locations.shape[0]


@dataclass
class FilterOutput:
    """Filter results projected onto the coefficient components.

    coef_* arrays index steps 1..N; *_cov entries may be None when thinned.
    per-observation predictive means and variances are lists of per-step
    arrays aligned with the non-missing stations of that step.
    """

    loglik: float
    coef_mean_filter: np.ndarray
    coef_cov_filter: list
    coef_mean_forecast: np.ndarray
    coef_cov_forecast: list
    pred_means: list = field(default_factory=list)
    pred_vars: list = field(default_factory=list)
    final_state: tuple | None = None


def _block_arrays(ss: BlockStateSpace):
    Fb = np.stack([fb.F for fb in ss.blocks])
    Sigb = np.stack([fb.Sigma for fb in ss.blocks])
    return Fb, Sigb


def predict_step(m: np.ndarray, S: np.ndarray, ss: BlockStateSpace):
    """One prediction step m -> F m, S -> F S F' + Sigma.

    F is block diagonal, so both products are done block-wise without ever
    forming the dense F.
    """
    Fb, Sigb = _block_arrays(ss)
    M, b = ss.M, ss.block_dim
    n = ss.total_dim
    m_pred = np.einsum("kij,kj->ki", Fb, m.reshape(M, b)).ravel()
    # F S: block rows on the left, then the same action on the transpose
    FS = np.einsum("kij,kjl->kil", Fb, S.reshape(M, b, n)).reshape(n, n)
    S_pred = np.einsum("kij,kjl->kil", Fb, FS.T.reshape(M, b, n)).reshape(n, n).T
    S_pred = np.ascontiguousarray(S_pred)
    for k in range(M):
        sl = slice(k * b, (k + 1) * b)
        S_pred[sl, sl] += Sigb[k]
    return m_pred, S_pred


def sequential_update(m: np.ndarray, S: np.ndarray, ys: np.ndarray,
                      H: np.ndarray, G: np.ndarray | None,
                      beta: np.ndarray | None, sigma_obs2: float):
    """Absorb one step's observations one scalar at a time.

    Returns the posterior mean/covariance together with the per-observation
    one-step predictive means and variances (used by the log-likelihood).
    Equals the joint Kalman update up to floating point.
    """
    m = m.copy()
    S = S.copy()
    yhat = np.empty(len(ys))
    avar = np.empty(len(ys))
    for j, y in enumerate(ys):
        h = H[j]
        Sh = S @ h
        a = float(h @ Sh) + sigma_obs2
        if a <= 0:
            raise ValueError(f"nonpositive innovation variance at observation {j}")
        mean = float(h @ m)
        if G is not None and beta is not None:
            mean += float(G[j] @ beta)
        k = Sh / a
        m += k * (y - mean)
        S -= np.outer(k, Sh)
        yhat[j] = mean
        avar[j] = a
    S = 0.5 * (S + S.T)
    return m, S, yhat, avar


def run_filter(ss: BlockStateSpace, obs: ObservationSet,
               beta: np.ndarray | None = None,
               sigma_obs: float | None = None,
               store_cov_stride: int = 1) -> FilterOutput:
    """Filter all steps and accumulate the exact Gaussian log-likelihood.

    Starts from the stationary initialization (zero mean, block-diagonal
    stationary covariance). Steps with no observations are predict-only.
    Coefficient-level means are always stored; covariances every
    store_cov_stride steps (others are None).
    """
    if sigma_obs is None:
        sigma_obs = ss.params.sigma_obs
    sigma_obs2 = sigma_obs ** 2
    basis = ss.basis
    if not np.all(basis.domain.contains(obs.locations)):
        raise ValueError("observation location outside domain")
    Hc = design_matrix(basis, obs.locations)  # (n_s, M)
    n = ss.total_dim
    b = ss.block_dim
    cidx = ss.c_indices
    # full-state observation rows (zeros off the coefficient components)
    Hfull = np.zeros((obs.n_locations, n))
    Hfull[:, cidx] = Hc
    G = obs.covariates
    m = np.zeros(n)
    S = np.zeros((n, n))
    for k, fb in enumerate(ss.blocks):
        sl = slice(k * b, (k + 1) * b)
        S[sl, sl] = fb.S_stat
    N = obs.n_steps
    M = ss.M
    out = FilterOutput(
        loglik=0.0,
        coef_mean_filter=np.zeros((N, M)),
        coef_cov_filter=[None] * N,
        coef_mean_forecast=np.zeros((N, M)),
        coef_cov_forecast=[None] * N,
    )
    loglik = 0.0
    for step in range(N):
        m, S = predict_step(m, S, ss)
        out.coef_mean_forecast[step] = m[cidx]
        if step % store_cov_stride == 0:
            out.coef_cov_forecast[step] = S[np.ix_(cidx, cidx)].copy()
        mask = ~np.isnan(obs.values[step])
        if np.any(mask):
            ys = obs.values[step, mask]
            try:
                m, S, yhat, avar = sequential_update(
                    m, S, ys, Hfull[mask], None if G is None else G[mask],
                    beta, sigma_obs2)
            except ValueError as e:
                raise ValueError(f"step {step + 1}: {e}") from e
            loglik += float(np.sum(-0.5 * (np.log(2.0 * math.pi * avar)
                                           + (ys - yhat) ** 2 / avar)))
            out.pred_means.append(yhat)
            out.pred_vars.append(avar)
        else:
            out.pred_means.append(np.empty(0))
            out.pred_vars.append(np.empty(0))
        out.coef_mean_filter[step] = m[cidx]
        if step % store_cov_stride == 0:
            out.coef_cov_filter[step] = S[np.ix_(cidx, cidx)].copy()
    out.loglik = loglik
    out.final_state = (m, S)
    return out


def forecast(ss: BlockStateSpace, coef_mean: np.ndarray, coef_cov: np.ndarray,
             locs, beta: np.ndarray | None = None,
             covariates: np.ndarray | None = None,
             include_obs_noise: bool = False,
             sigma_obs: float | None = None):
    """Predictive mean and variance of the field at locations.

    coef_mean/coef_cov are the coefficient-level first two moments of any
    filter or forecast distribution. With include_obs_noise the measurement
    error variance is added (predicting observations, not the signal).
    """
    H = design_matrix(ss.basis, locs)
    mean = H @ coef_mean
    if beta is not None and covariates is not None:
        mean = mean + np.atleast_2d(covariates) @ beta
    var = np.einsum("ij,jk,ik->i", H, coef_cov, H)
    if include_obs_noise:
        if sigma_obs is None:
            sigma_obs = ss.params.sigma_obs
        var = var + sigma_obs ** 2
    return mean, var


def predictions_csv(steps, locs, means, sds, kinds) -> str:
    """(step, location, mean, sd, kind) export."""
    buf = io.StringIO()
    buf.write("step,x,y,mean,sd,kind\n")
    for s, loc, mu, sd, kind in zip(steps, locs, means, sds, kinds):
        x = repr(float(loc[0]))
        y = repr(float(loc[1])) if len(loc) > 1 else ""
        buf.write(f"{s},{x},{y},{float(mu)!r},{float(sd)!r},{kind}\n")
    return buf.getvalue()
