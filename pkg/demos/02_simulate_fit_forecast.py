"""Simulate a field, fit it back, and forecast at the stations.

End-to-end tour of the inference workflow on a small 2D configuration:
simulate coefficient paths from the exact stationary covariance, observe
them with noise at random stations, run the two-step fit (OLS mean, then
maximum likelihood on the residuals), and compare filter and one-step
forecast predictions at the stations.

Run time: about a minute (dominated by the likelihood optimizations).
"""

import numpy as np

from stmatern import (NaturalParams, ObservationSet, RectangleDomain,
                      SIMPLE_MODEL_FIXED, TimeGrid, assemble, build_basis,
                      crps_gaussian, field_at, fit_mle, forecast,
                      ols_fixed_effects, rational_for, run_filter,
                      simulate_exact, to_spde, with_normalization)

rng = np.random.default_rng(7)
dom = RectangleDomain(2, (1.0, 1.0))
M = 36
grid = TimeGrid(dt=1.0, N=30)

# ---------------------------------------------------------------------------
# 1. Simulate and observe
# ---------------------------------------------------------------------------
truth = NaturalParams(nu_t=1.0, nu_s=1.0, r_t=10.0, r_s=1.0,
                      beta_sep=0.75, sigma=3.5, sigma_obs=0.35)
basis = build_basis(dom, M)
sp_truth = with_normalization(to_spde(truth, 2), basis)
paths = simulate_exact(sp_truth, basis, grid, seed=1)
locs = rng.uniform(0.2, 0.8, size=(60, 2))
y = field_at(paths[:, 1:], basis, locs).T
y = y + truth.sigma_obs * rng.standard_normal(y.shape)
obs = ObservationSet(locations=locs, values=y)
print(f"simulated {grid.N} steps at {len(locs)} stations "
      f"(true beta_s = {truth.beta_sep})")

# ---------------------------------------------------------------------------
# 2. Two-step fit: OLS mean, then MLE on residuals
# ---------------------------------------------------------------------------
beta, resid = ols_fixed_effects(obs)
print(f"OLS intercept: {beta[0]:.3f}")
init = NaturalParams(nu_t=0.75, nu_s=0.75, r_t=5.0, r_s=0.5,
                     beta_sep=0.4, sigma=2.0, sigma_obs=0.5)
fits = {}
for model, fixed in (("Full", None), ("Simple", SIMPLE_MODEL_FIXED)):
    fr = fit_mle(resid, dom, M, grid, 1, init, fixed=fixed, maxiter=6)
    fits[model] = fr
    p = fr.theta_hat
    print(f"{model:6s} loglik {fr.loglik_at_opt:9.2f}  "
          f"beta_s={p.beta_sep:.3f} sigma={p.sigma:.2f} "
          f"sigma_obs={p.sigma_obs:.3f} ({fr.n_eval} evaluations)")

# ---------------------------------------------------------------------------
# 3. Filter and one-step forecast at the stations
# ---------------------------------------------------------------------------
for model, fr in fits.items():
    p = fr.theta_hat
    sp = with_normalization(to_spde(p, 2), basis)
    ss = assemble(sp, basis, rational_for(sp, 1), grid, r_t=p.r_t)
    out = run_filter(ss, resid, sigma_obs=p.sigma_obs)
    scores = {}
    for kind, means, covs in (("filter", out.coef_mean_filter,
                               out.coef_cov_filter),
                              ("forecast", out.coef_mean_forecast,
                               out.coef_cov_forecast)):
        crps = []
        for n in range(grid.N):
            mu, var = forecast(ss, means[n], covs[n], locs,
                               include_obs_noise=True, sigma_obs=p.sigma_obs)
            crps.append(crps_gaussian(resid.values[n], mu, np.sqrt(var)))
        scores[kind] = float(np.mean(crps))
    print(f"{model:6s} mean CRPS: filter {scores['filter']:.3f}  "
          f"one-step forecast {scores['forecast']:.3f}")

print("\nthe Full model can pick up the non-separability (beta_s > 0);")
print("the Simple model is pinned to a separable AR(1)-in-time field.")
