"""Model parameterizations and the maps between them.

Two equivalent parameter sets describe the field: the "natural" set
(smoothnesses, ranges, non-separability, standard deviations) and the
operator-level set (fractional exponents, inverse-range scale). Both are
frozen dataclasses validated on construction, so downstream code can rely
on the bounds. A third, unconstrained representation is used by the
optimizer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "NaturalParams",
    "SpdeParams",
    "to_spde",
    "to_natural",
    "to_opt",
    "from_opt",
    "OPT_NAMES",
]

# Order of the unconstrained optimizer vector.
OPT_NAMES = ("nu_t", "nu_s", "beta_sep", "r_t", "r_s", "sigma", "sigma_obs")


@dataclass(frozen=True)
class NaturalParams:
    """Interpretable parameterization of the spatio-temporal field.

    nu_s, nu_t are spatial/temporal smoothness, r_s, r_t spatial/temporal
    ranges, beta_sep the degree of non-separability in [0, 1], sigma the
    marginal standard deviation and sigma_obs the measurement-error
    standard deviation.
    """

    nu_s: float
    nu_t: float
    r_s: float
    r_t: float
    beta_sep: float
    sigma: float
    sigma_obs: float

    def __post_init__(self):
        if not (self.nu_s > 0.25):
            raise ValueError(f"nu_s must be > 0.25, got {self.nu_s}")
        if not (0.25 < self.nu_t < 3.25):
            raise ValueError(f"nu_t must be in (0.25, 3.25), got {self.nu_t}")
        if not (self.r_s > 0.005):
            raise ValueError(f"r_s must be > 0.005, got {self.r_s}")
        if not (self.r_t > 0.005):
            raise ValueError(f"r_t must be > 0.005, got {self.r_t}")
        if not (0.0 <= self.beta_sep <= 1.0):
            raise ValueError(f"beta_sep must be in [0, 1], got {self.beta_sep}")
        if not (self.sigma > 0.005):
            raise ValueError(f"sigma must be > 0.005, got {self.sigma}")
        if not (self.sigma_obs > 0.0):
            raise ValueError(f"sigma_obs must be > 0, got {self.sigma_obs}")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, s: str) -> "NaturalParams":
        return cls(**json.loads(s))


@dataclass(frozen=True)
class SpdeParams:
    """Operator-level parameterization.

    gamma is the temporal fractional order, alpha the spatial-operator
    power inside the time operator, beta the noise-coloring power, kappa
    the inverse-range scale, r the temporal scale and C the variance
    normalization constant. sigma and sigma_obs are carried through.
    """

    gamma: float
    alpha: float
    beta: float
    kappa: float
    r: float
    C: float
    sigma: float
    sigma_obs: float

    def __post_init__(self):
        if not (self.gamma > 0.5):
            raise ValueError(f"gamma must be > 1/2, got {self.gamma}")
        if self.existence_margin < -1e-12:
            # margin 0 is allowed: the truncated model stays well defined
            # there (only the untruncated variance diverges) and the d=1
            # covariance verification sits exactly on this boundary; the
            # small tolerance absorbs rounding in the parameter maps
            raise ValueError(
                "existence condition beta + alpha*(2*gamma - 1) - 1 >= 0 violated "
                f"(margin {self.existence_margin:.3g})"
            )
        if self.kappa <= 0 or self.r <= 0 or self.C <= 0:
            raise ValueError("kappa, r, C must be positive")

    @property
    def existence_margin(self) -> float:
        return self.beta + self.alpha * (2.0 * self.gamma - 1.0) - 1.0

    @property
    def eta(self) -> float:
        """Fractional part of gamma driving the rational approximation."""
        return self.gamma - math.floor(self.gamma)


def to_spde(p: NaturalParams, d: int, C: float = 1.0) -> SpdeParams:
    """Map natural parameters to operator-level parameters in dimension d.

    C is not determined by this map (it depends on the spectral truncation);
    pass the value from covariance.normalization_constant or leave the
    placeholder 1.0.
    """
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    beta_star = p.nu_s / (p.nu_s + d / 2.0)
    ratio = p.beta_sep / beta_star
    gamma = p.nu_t * max(1.0, ratio) + 0.5
    alpha = p.nu_s / (2.0 * p.nu_t) * min(1.0, ratio)
    beta = (1.0 - p.beta_sep) / beta_star * p.nu_s
    kappa = math.sqrt(8.0 * p.nu_s) / p.r_s
    r = p.r_t * kappa ** (2.0 * alpha) / math.sqrt(8.0 * (gamma - 0.5))
    return SpdeParams(
        gamma=gamma, alpha=alpha, beta=beta, kappa=kappa, r=r,
        C=C, sigma=p.sigma, sigma_obs=p.sigma_obs,
    )


def to_natural(p: SpdeParams, d: int) -> NaturalParams:
    """Inverse of to_spde (exact up to floating point)."""
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    two_gm1 = 2.0 * p.gamma - 1.0
    nu_s = p.beta + two_gm1 * p.alpha - d / 2.0
    if p.alpha > 0:
        # the 2 alpha divisor makes this an exact inverse of the forward
        # map in the non-separable branch (beta - d/2 < 0):
        # (beta - d/2) / (2 alpha) = nu_t (1 - beta_sep / beta*)
        nu_t = p.gamma - 0.5 + min(p.beta - d / 2.0, 0.0) / (2.0 * p.alpha)
    else:
        # separable limit: beta = nu_s / beta* = nu_s + d/2 >= d/2
        if p.beta < d / 2.0:
            raise ValueError("alpha = 0 requires beta >= d/2")
        nu_t = p.gamma - 0.5
    beta_sep = two_gm1 * p.alpha / (p.beta + two_gm1 * p.alpha)
    r_s = math.sqrt(8.0 * nu_s) / p.kappa
    r_t = p.r * p.kappa ** (-2.0 * p.alpha) * math.sqrt(8.0 * (p.gamma - 0.5))
    return NaturalParams(
        nu_s=nu_s, nu_t=nu_t, r_s=r_s, r_t=r_t, beta_sep=beta_sep,
        sigma=p.sigma, sigma_obs=p.sigma_obs,
    )


def to_opt(p: NaturalParams) -> np.ndarray:
    """Map natural parameters to the unconstrained optimizer vector.

    Rejects values on the boundary of the open box (including
    beta_sep in {0, 1}); those are representable as NaturalParams but not
    in the transformed space.
    """
    a = p.nu_t - 0.25
    if not (0.0 < a < 3.0):
        raise ValueError("nu_t outside open transform range (0.25, 3.25)")
    if not (0.0 < p.beta_sep < 1.0):
        raise ValueError("beta_sep must be strictly inside (0, 1) for to_opt")
    return np.array([
        math.log(a / 2.5) - math.log(1.0 - a / 3.0),
        math.log(p.nu_s - 0.25),
        math.log(-2.0 * p.beta_sep / (p.beta_sep - 1.0)) / 3.0,
        math.log(p.r_t - 0.005),
        math.log(p.r_s - 0.005),
        math.log(p.sigma - 0.005),
        math.log(p.sigma_obs),
    ])


def from_opt(v: np.ndarray) -> NaturalParams:
    """Map an unconstrained 7-vector into the valid natural-parameter box."""
    v = np.asarray(v, dtype=float)
    if v.shape != (7,) or not np.all(np.isfinite(v)):
        raise ValueError("optimizer vector must be 7 finite reals")
    # nu_t: v = log(a/2.5) - log(1 - a/3)  =>  a = 2.5 e^v / (1 + (2.5/3) e^v)
    ev = math.exp(v[0])
    a = 2.5 * ev / (1.0 + 2.5 * ev / 3.0)
    nu_t = 0.25 + a
    nu_s = 0.25 + math.exp(v[1])
    e3 = math.exp(3.0 * v[2])
    beta_sep = e3 / (2.0 + e3)
    return NaturalParams(
        nu_t=nu_t,
        nu_s=nu_s,
        beta_sep=beta_sep,
        r_t=0.005 + math.exp(v[3]),
        r_s=0.005 + math.exp(v[4]),
        sigma=0.005 + math.exp(v[5]),
        sigma_obs=math.exp(v[6]),
    )
