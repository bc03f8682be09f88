"""Command-line entry points for the experiment drivers.

Every subcommand reads an optional JSON config file, applies --set
key=value overrides, writes its CSV outputs into --out, and drops a JSON
run manifest next to them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (CvConfig, SimStudyConfig, VerifyConfig, block_cv,
                      read_observations_csv, run_manifest, simstudy,
                      spatial_rate_check, verify_covariance,
                      write_observations_csv)
from .inference import SIMPLE_MODEL_FIXED, fit_mle, ols_fixed_effects
from .kalman import ObservationSet, run_filter, forecast, predictions_csv
from .params import NaturalParams, to_spde
from .covariance import with_normalization
from .spectral import RectangleDomain, build_basis
from .statespace import (TimeGrid, assemble, field_at, paths_csv,
                         rational_for, simulate_exact, simulate_statespace)


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        cfg.update(json.loads(Path(args.config).read_text()))
    for item in args.set or []:
        key, _, val = item.partition("=")
        if not _:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        try:
            cfg[key] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key] = val
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text)
    print(f"wrote {out / name}")


def _domain(cfg) -> RectangleDomain:
    lengths = cfg.get("lengths", [1.0, 1.0])
    return RectangleDomain(len(lengths), tuple(lengths))


def _natural(cfg, key="params") -> NaturalParams:
    if key not in cfg:
        raise SystemExit(f"config key {key!r} (natural parameters) required")
    return NaturalParams(**cfg[key])


def _model(p, dom, M, grid, m):
    basis = build_basis(dom, M)
    sp = with_normalization(to_spde(p, dom.d), basis)
    return assemble(sp, basis, rational_for(sp, m), grid, r_t=p.r_t), basis


def cmd_basis(args):
    cfg = _load_config(args)
    dom = _domain(cfg)
    basis = build_basis(dom, cfg.get("M", 64))
    out = _outdir(args)
    _write(out, "basis.csv", basis.summary_csv())
    _write(out, "manifest.json", run_manifest(cfg, args.seed))


def cmd_verify_cov(args):
    cfg = _load_config(args)
    allowed = {f for f in VerifyConfig.__dataclass_fields__}
    vc = VerifyConfig(**{k: tuple(v) if isinstance(v, list) else v
                         for k, v in cfg.items() if k in allowed})
    _, csv_text = verify_covariance(vc)
    out = _outdir(args)
    _write(out, "verify.csv", csv_text)
    _write(out, "manifest.json", run_manifest(vc, args.seed))


def cmd_rate_check(args):
    cfg = _load_config(args)
    nu_s = cfg.get("nu_s", 0.5)
    ladder = tuple(cfg.get("ladder", [32, 64, 128, 256]))
    slope, errors = spatial_rate_check(nu_s, ladder=ladder,
                                       M_ref=cfg.get("M_ref", 4096))
    lines = ["M,sup_error"] + [f"{M},{e!r}" for M, e in errors]
    out = _outdir(args)
    _write(out, "rate.csv", "\n".join(lines) + f"\nslope,{slope!r}\n")
    _write(out, "manifest.json", run_manifest(cfg, args.seed))
    print(f"slope {slope:.3f} (expected {-2 * nu_s / 1:.3f} in 1D)")


def cmd_simulate(args):
    cfg = _load_config(args)
    dom = _domain(cfg)
    p = _natural(cfg)
    M = cfg.get("M", 64)
    grid = TimeGrid(dt=cfg.get("dt", 1.0), N=cfg.get("N", 45))
    basis = build_basis(dom, M)
    sp = with_normalization(to_spde(p, dom.d), basis)
    out = _outdir(args)
    if cfg.get("method", "exact") == "exact":
        paths = simulate_exact(sp, basis, grid, seed=args.seed)
    else:
        ss = _model(p, dom, M, grid, cfg.get("m", 1))[0]
        paths = simulate_statespace(ss, grid, seed=args.seed)
    _write(out, "paths.csv", paths_csv(paths, grid.dt))
    if "locations" in cfg:
        locs = np.asarray(cfg["locations"], dtype=float)
        rng = np.random.default_rng(args.seed + 1)
        y = field_at(paths[:, 1:], basis, locs).T
        y = y + p.sigma_obs * rng.standard_normal(y.shape)
        obs = ObservationSet(locations=locs, values=y)
        _write(out, "observations.csv", write_observations_csv(obs))
    _write(out, "manifest.json", run_manifest(cfg, args.seed))


def _read_obs(args):
    return read_observations_csv(Path(args.data).read_text())


def cmd_fit(args):
    cfg = _load_config(args)
    obs, times = _read_obs(args)
    dom = _domain(cfg)
    grid = TimeGrid(dt=cfg.get("dt", 1.0), N=obs.n_steps)
    init = _natural(cfg, "init")
    fixed = SIMPLE_MODEL_FIXED if cfg.get("model") == "Simple" \
        else cfg.get("fixed")
    beta, resid = ols_fixed_effects(obs)
    fr = fit_mle(resid, dom, cfg.get("M", 64), grid, cfg.get("m", 1), init,
                 fixed=fixed, maxiter=cfg.get("maxiter", 60),
                 n_jobs=cfg.get("n_jobs", 1))
    fr.beta_hat = beta
    out = _outdir(args)
    _write(out, "fit.json", fr.to_json())
    _write(out, "manifest.json", run_manifest(cfg, args.seed))
    print(f"loglik {fr.loglik_at_opt:.2f} after {fr.n_eval} evaluations")


def _filter_common(args, one_step: bool):
    cfg = _load_config(args)
    obs, times = _read_obs(args)
    dom = _domain(cfg)
    p = _natural(cfg)
    grid = TimeGrid(dt=cfg.get("dt", 1.0), N=obs.n_steps)
    ss, basis = _model(p, dom, cfg.get("M", 64), grid, cfg.get("m", 1))
    beta, resid = ols_fixed_effects(obs)
    out_f = run_filter(ss, resid, sigma_obs=p.sigma_obs)
    means = out_f.coef_mean_forecast if one_step else out_f.coef_mean_filter
    covs = out_f.coef_cov_forecast if one_step else out_f.coef_cov_filter
    kind = "forecast" if one_step else "filter"
    steps, locs_out, mus, sds, kinds = [], [], [], [], []
    Gi = None if obs.covariates is None else np.column_stack(
        [np.ones(obs.n_locations), obs.covariates])
    for n in range(obs.n_steps):
        mu, var = forecast(ss, means[n], covs[n], obs.locations,
                           beta=None if Gi is None else beta,
                           covariates=Gi, include_obs_noise=True,
                           sigma_obs=p.sigma_obs)
        if Gi is None:
            mu = mu + beta[0]
        for i in range(obs.n_locations):
            steps.append(n + 1)
            locs_out.append(obs.locations[i])
            mus.append(mu[i])
            sds.append(float(np.sqrt(var[i])))
            kinds.append(kind)
    out = _outdir(args)
    _write(out, f"{kind}.csv",
           predictions_csv(steps, locs_out, mus, sds, kinds))
    _write(out, "manifest.json", run_manifest(cfg, args.seed))
    print(f"{kind} loglik {out_f.loglik:.2f}")


def cmd_filter(args):
    _filter_common(args, one_step=False)


def cmd_forecast(args):
    _filter_common(args, one_step=True)


def cmd_simstudy(args):
    cfg = _load_config(args)
    allowed = {f for f in SimStudyConfig.__dataclass_fields__}
    sc = SimStudyConfig(**{k: tuple(tuple(x) if isinstance(x, list) else x
                                    for x in v) if isinstance(v, list) else v
                           for k, v in cfg.items() if k in allowed})
    res = simstudy(sc, seed=args.seed, log=print)
    out = _outdir(args)
    _write(out, "estimates.csv", res.estimates_csv())
    _write(out, "scores.csv", res.scores_csv())
    _write(out, "manifest.json", run_manifest(sc, args.seed))
    if res.failures:
        print(f"{len(res.failures)} replicate(s) failed:")
        for label, rep, msg in res.failures:
            print(f"  {label} #{rep}: {msg}")


def cmd_cv(args):
    cfg = _load_config(args)
    obs, times = _read_obs(args)
    dom = _domain(cfg)
    allowed = {f for f in CvConfig.__dataclass_fields__}
    kw = {k: v for k, v in cfg.items() if k in allowed}
    if "init" in kw:
        kw["init"] = NaturalParams(**kw["init"])
    cc = CvConfig(**kw)
    res = block_cv(obs, dom, cc, log=print)
    lines = ["fold,kind,rmse,crps"]
    for f, kind, rmse, crps in res.fold_scores:
        lines.append(f"{f},{kind},{rmse!r},{crps!r}")
    lines.append(f"all,filter,{res.rmse_filter!r},{res.crps_filter!r}")
    lines.append(f"all,forecast,{res.rmse_forecast!r},{res.crps_forecast!r}")
    out = _outdir(args)
    _write(out, "cv.csv", "\n".join(lines) + "\n")
    _write(out, "manifest.json", run_manifest(cfg, args.seed))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stmatern",
        description="Non-separable spatio-temporal field: experiment drivers")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "basis": (cmd_basis, "summarize the spectral basis", False),
        "verify-cov": (cmd_verify_cov, "covariance sup-error sweep", False),
        "rate-check": (cmd_rate_check, "spatial truncation rate", False),
        "simulate": (cmd_simulate, "simulate coefficient paths", False),
        "fit": (cmd_fit, "two-step OLS + MLE fit", True),
        "filter": (cmd_filter, "filter distributions at stations", True),
        "forecast": (cmd_forecast, "one-step forecasts at stations", True),
        "simstudy": (cmd_simstudy, "Full-vs-Simple simulation study", False),
        "cv": (cmd_cv, "spatial block cross-validation", True),
    }
    for name, (fn, help_text, needs_data) in commands.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (JSON value)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        if needs_data:
            sp.add_argument("--data", required=True,
                            help="observation CSV (time,x,y,value[,cov_*...])")
        sp.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
