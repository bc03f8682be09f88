"""Rational approximation of the fractional factor (1 - z)^eta.

A degree-(m, m) rational function with real coefficients is fitted to
(1 - x)^eta on a 1001-point grid of [0, 1] (the real slice of the unit
disc) by linearized least squares followed by Lawson-style reweighting
towards the minimax solution. Fits are cached per (eta, m) since they do
not depend on the time step or the frequency.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RationalApprox", "fit_rational", "eval_rational", "disc_error"]

GRID = np.linspace(0.0, 1.0, 1001)
MAX_ORDER = 3

_cache: dict[tuple[float, int], "RationalApprox"] = {}
_cache_lock = threading.Lock()


@dataclass(frozen=True)
class RationalApprox:
    """p(z)/q(z) ~ (1 - z)^eta with real coefficients, ascending degree."""

    m: int
    eta: float
    p_coeffs: np.ndarray
    q_coeffs: np.ndarray
    grid_error: float
    constant_fallback: bool = field(default=False)

    def __post_init__(self):
        if abs(self.p_coeffs[0]) < 1e-12 or abs(self.q_coeffs[0]) < 1e-12:
            raise ValueError("p(0) and q(0) must be nonzero")

    def to_json(self) -> str:
        return json.dumps({
            "eta": self.eta, "m": self.m,
            "p": list(map(float, self.p_coeffs)),
            "q": list(map(float, self.q_coeffs)),
            "grid_error": self.grid_error,
        })


def _polyval(coeffs: np.ndarray, z):
    # ascending-degree Horner; works for real and complex z
    out = np.zeros_like(np.asarray(z) * coeffs[0])
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def eval_rational(ra: RationalApprox, z):
    """Evaluate p(z)/q(z); conjugate symmetry holds since coefficients are real."""
    return _polyval(ra.p_coeffs, z) / _polyval(ra.q_coeffs, z)


def _grid_error(p: np.ndarray, q: np.ndarray, eta: float) -> float:
    y = (1.0 - GRID) ** eta
    return float(np.max(np.abs(_polyval(p, GRID) / _polyval(q, GRID) - y)))


def _fit(eta: float, m: int) -> RationalApprox:
    if eta == 0.0:
        return RationalApprox(m=m, eta=0.0, p_coeffs=np.array([1.0]),
                              q_coeffs=np.array([1.0]), grid_error=0.0)
    if m == 0:
        # best constant approximation of a monotone function on [0, 1]
        return RationalApprox(m=0, eta=eta, p_coeffs=np.array([0.5]),
                              q_coeffs=np.array([1.0]), grid_error=0.5,
                              constant_fallback=True)
    x = GRID
    y = (1.0 - x) ** eta
    # powers for p (deg m) and q (deg m, q0 = 1 fixed)
    Xp = x[:, None] ** np.arange(m + 1)
    Xq = x[:, None] ** np.arange(1, m + 1)
    w = np.ones_like(x)
    best_p = best_q = None
    best_err = np.inf
    qx = np.ones_like(x)
    for it in range(60):
        # linearized residual p(x) - y q(x), weighted by w / q(x) so that the
        # weighted problem tracks the true error |p/q - y|
        sw = np.sqrt(w) / np.abs(qx)
        A = np.hstack([Xp * sw[:, None], -(y[:, None] * Xq) * sw[:, None]])
        rhs = y * sw
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        p = sol[:m + 1]
        q = np.concatenate([[1.0], sol[m + 1:]])
        qx_new = _polyval(q, x)
        if np.any(np.abs(qx_new) < 1e-12):
            break
        qx = qx_new
        err = np.abs(_polyval(p, x) / qx - y)
        sup = float(err.max())
        if sup < best_err:
            best_err, best_p, best_q = sup, p, q
        # Lawson update pushes the weighted LS solution towards minimax
        w = w * (err + 1e-15)
        w = w / w.sum()
    if best_p is None:
        raise RuntimeError(f"rational fit failed for eta={eta}, m={m}")
    return RationalApprox(m=m, eta=eta, p_coeffs=best_p, q_coeffs=best_q,
                          grid_error=best_err)


def fit_rational(eta: float, m: int) -> RationalApprox:
    """Fitted (and cached) rational approximation of (1 - z)^eta.

    eta must lie in [0, 1) and m in {0, .., 3}; higher orders are unstable
    downstream and are rejected rather than clamped.
    """
    if not (0.0 <= eta < 1.0):
        raise ValueError(f"eta must be in [0, 1), got {eta}")
    if m not in (0, 1, 2, 3):
        raise ValueError(f"m must be in {{0, 1, 2, 3}}, got {m}")
    key = (round(eta, 6), m)
    with _cache_lock:
        hit = _cache.get(key)
    if hit is not None:
        return hit
    ra = _fit(key[0], m)
    with _cache_lock:
        _cache.setdefault(key, ra)
    return ra


def disc_error(ra: RationalApprox, n_samples: int = 4000) -> float:
    """Max |(1-z)^eta - p(z)/q(z)| over sampled closed unit disc.

    Uses the principal branch of the power. Returns inf if q vanishes at a
    sampled point (a pole inside the disc breaks invertibility).
    """
    n_ring = max(8, int(np.sqrt(n_samples)))
    n_ang = max(16, n_samples // n_ring)
    radii = np.linspace(0.0, 1.0, n_ring)
    angles = np.linspace(0.0, 2.0 * np.pi, n_ang, endpoint=False)
    z = np.multiply.outer(radii, np.exp(1j * angles)).ravel()
    qz = _polyval(ra.q_coeffs, z)
    if np.any(np.abs(qz) < 1e-13):
        return float("inf")
    target = (1.0 - z) ** complex(ra.eta)
    return float(np.max(np.abs(target - _polyval(ra.p_coeffs, z) / qz)))
