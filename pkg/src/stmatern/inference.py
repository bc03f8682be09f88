"""Two-step estimation and prediction scoring.

Fixed effects are estimated by ordinary least squares on the raw
observations; the covariance parameters are then estimated by maximizing
the Kalman log-likelihood of the residuals over the unconstrained
optimizer space. Scoring uses RMSE on the coefficient scale and the
closed-form Gaussian CRPS.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .kalman import ObservationSet, run_filter
from .params import OPT_NAMES, NaturalParams, from_opt, to_opt, to_spde
from .covariance import with_normalization
from .spectral import RectangleDomain, SpectralBasis, build_basis, design_matrix
from .statespace import BlockStateSpace, TimeGrid, assemble, rational_for

__all__ = [
    "FitResult",
    "ols_fixed_effects",
    "fit_mle",
    "crps_gaussian",
    "score_predictions",
    "SIMPLE_MODEL_FIXED",
]

# 'Simple' separable baseline: AR(1) in time driven by colored noise.
SIMPLE_MODEL_FIXED = {"nu_t": 0.5, "nu_s": 1.0, "beta_sep": 0.0}

FAIL_OBJECTIVE = 1e12


@dataclass
class FitResult:
    beta_hat: np.ndarray | None
    theta_hat: NaturalParams
    loglik_at_opt: float
    n_iter: int
    n_eval: int
    converged: bool
    trace: list = field(default_factory=list)

    def to_json(self) -> str:
        d = {name: getattr(self.theta_hat, name) for name in OPT_NAMES}
        return json.dumps({
            "beta": None if self.beta_hat is None else list(map(float, self.beta_hat)),
            "params": d,
            "loglik": self.loglik_at_opt,
            "iterations": self.n_iter,
            "evaluations": self.n_eval,
            "converged": self.converged,
        })


def ols_fixed_effects(obs: ObservationSet):
    """OLS fit of the static covariates (intercept added) and residuals.

    Returns (beta_hat, residual ObservationSet). The residual set keeps the
    same locations and missingness, with no covariates attached.
    """
    n_s = obs.n_locations
    if obs.covariates is None:
        G = np.ones((n_s, 1))
    else:
        G = np.column_stack([np.ones(n_s), obs.covariates])
    rank = np.linalg.matrix_rank(G)
    if rank < G.shape[1]:
        _, R, piv = _qr_pivot(G)
        dep = sorted(piv[rank:])
        raise ValueError(f"rank-deficient covariates; dependent columns {dep}")
    mask = ~np.isnan(obs.values)
    steps, stations = np.nonzero(mask)
    y = obs.values[steps, stations]
    X = G[stations]
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = np.full_like(obs.values, np.nan)
    resid[steps, stations] = y - X @ beta
    return beta, ObservationSet(locations=obs.locations, values=resid)


def _qr_pivot(G):
    from scipy.linalg import qr
    Q, R, piv = qr(G, pivoting=True)
    return Q, R, piv


def build_model(p: NaturalParams, dom: RectangleDomain, M: int,
                grid: TimeGrid, m: int) -> BlockStateSpace:
    """Assemble the inference state-space model for natural parameters."""
    basis = build_basis(dom, M)
    sp = with_normalization(to_spde(p, dom.d), basis)
    ra = rational_for(sp, m)
    return assemble(sp, basis, ra, grid, r_t=p.r_t)


def model_loglik(p: NaturalParams, obs: ObservationSet, dom: RectangleDomain,
                 M: int, grid: TimeGrid, m: int,
                 beta: np.ndarray | None = None) -> float:
    ss = build_model(p, dom, M, grid, m)
    out = run_filter(ss, obs, beta=beta, sigma_obs=p.sigma_obs,
                     store_cov_stride=10 ** 9)
    return out.loglik


def _params_from_free(v_free, free_idx, v_full, fixed_natural):
    v = v_full.copy()
    v[free_idx] = v_free
    p = from_opt(v)
    if fixed_natural:
        p = dataclasses.replace(p, **fixed_natural)
    return p


def fit_mle(obs: ObservationSet, dom: RectangleDomain, M: int, grid: TimeGrid,
            m: int, init: NaturalParams,
            fixed: dict | None = None,
            beta: np.ndarray | None = None,
            maxiter: int = 60,
            ftol: float = 1e-6,
            fd_step: float = 1e-4,
            n_jobs: int = 1) -> FitResult:
    """Maximize the Kalman log-likelihood over the transformed space.

    fixed maps natural-parameter names to pinned values (e.g. the 'Simple'
    model restriction); the remaining coordinates are optimized with
    L-BFGS-B using central-difference gradients. A per-evaluation failure
    counts as -inf objective, which keeps the search inside the numerically
    stable region.
    """
    fixed = dict(fixed or {})
    free_names = [nm for nm in OPT_NAMES if nm not in fixed]
    free_idx = np.array([OPT_NAMES.index(nm) for nm in free_names])
    # seed the full transformed vector from init, with fixed slots pinned
    init_for_transform = init
    boundary_fix = {}
    if init.beta_sep in (0.0, 1.0):
        # boundary beta_sep is valid as a parameter but not transformable
        init_for_transform = dataclasses.replace(init, beta_sep=0.5)
        boundary_fix["beta_sep"] = init.beta_sep
    v_full = to_opt(init_for_transform)
    fixed_natural = {**boundary_fix, **fixed}
    n_eval = [0]
    best = {"f": -np.inf, "p": None}

    def objective(v_free) -> float:
        n_eval[0] += 1
        try:
            p = _params_from_free(v_free, free_idx, v_full, fixed_natural)
            ll = model_loglik(p, obs, dom, M, grid, m, beta=beta)
        except (ValueError, np.linalg.LinAlgError):
            return FAIL_OBJECTIVE
        if not np.isfinite(ll):
            return FAIL_OBJECTIVE
        if ll > best["f"]:
            best["f"] = ll
            best["p"] = p
        return -ll

    def value_and_grad(v_free):
        f0 = objective(v_free)
        shifts = []
        for i in range(len(v_free)):
            for s in (+fd_step, -fd_step):
                v = v_free.copy()
                v[i] += s
                shifts.append(v)
        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as ex:
                vals = list(ex.map(objective, shifts))
        else:
            vals = [objective(v) for v in shifts]
        g = np.array([(vals[2 * i] - vals[2 * i + 1]) / (2.0 * fd_step)
                      for i in range(len(v_free))])
        return f0, g

    x0 = v_full[free_idx]
    trace = []

    def cb(xk):
        trace.append(best["f"])

    res = minimize(value_and_grad, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": ftol}, callback=cb)
    if best["p"] is None:
        raise RuntimeError("all likelihood evaluations failed")
    return FitResult(beta_hat=beta, theta_hat=best["p"], loglik_at_opt=best["f"],
                     n_iter=res.nit, n_eval=n_eval[0],
                     converged=bool(res.success), trace=trace)


def crps_gaussian(y, mean, sd):
    """Closed-form CRPS of a Gaussian predictive distribution."""
    sd = np.asarray(sd, dtype=float)
    if np.any(sd <= 0):
        raise ValueError("sd must be positive")
    z = (np.asarray(y, dtype=float) - mean) / sd
    out = sd * (z * (2.0 * norm.cdf(z) - 1.0) + 2.0 * norm.pdf(z)
                - 1.0 / math.sqrt(math.pi))
    return float(out) if out.ndim == 0 else out


def score_predictions(truth_coefs: np.ndarray, pred_means: np.ndarray,
                      pred_covs, basis_sim: SpectralBasis,
                      basis_inf: SpectralBasis, grid_n: int = 21):
    """RMSE and CRPS of coefficient-level predictions against a richer truth.

    truth_coefs is (n_steps, M_sim), pred_means (n_steps, M_inf) with
    M_inf <= M_sim (missing coefficients are treated as predicted zero;
    valid because the bases are nested). pred_covs is a per-step list of
    (M_inf, M_inf) covariances. CRPS is evaluated on an equidistant
    grid_n x grid_n node grid with Gaussian predictive distributions.
    """
    truth_coefs = np.atleast_2d(truth_coefs)
    pred_means = np.atleast_2d(pred_means)
    n_steps, M_sim = truth_coefs.shape
    M_inf = pred_means.shape[1]
    if M_inf > M_sim or pred_means.shape[0] != n_steps:
        raise ValueError("prediction dimensions incompatible with truth")
    diff = truth_coefs.copy()
    diff[:, :M_inf] -= pred_means
    rmse = float(np.sqrt(np.mean(np.sum(diff ** 2, axis=1))))

    dom = basis_sim.domain
    axes = [np.linspace(0.0, L, grid_n) for L in dom.lengths]
    if dom.d == 1:
        locs = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        locs = np.column_stack([X.ravel(), Y.ravel()])
    H_sim = design_matrix(basis_sim, locs)
    H_inf = design_matrix(basis_inf, locs)
    crps_vals = []
    for nstep in range(n_steps):
        truth_field = H_sim @ truth_coefs[nstep]
        mean_field = H_inf @ pred_means[nstep]
        var_field = np.einsum("ij,jk,ik->i", H_inf, pred_covs[nstep], H_inf)
        sd_field = np.sqrt(np.maximum(var_field, 1e-300))
        crps_vals.append(crps_gaussian(truth_field, mean_field, sd_field))
    crps = float(np.mean(crps_vals))
    return rmse, crps
