"""Neumann-Laplacian eigenbasis on rectangles.

The eigenfunctions are normalized cosine products indexed by integer
frequency tuples; eigenvalues are sorted ascending with lexicographic
tie-breaking so basis construction is deterministic.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["RectangleDomain", "SpectralBasis", "build_basis", "eval_basis", "design_matrix"]


@dataclass(frozen=True)
class RectangleDomain:
    """Open rectangle (0, A_1) or (0, A_1) x (0, A_2)."""

    d: int
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if len(self.lengths) != self.d:
            raise ValueError("lengths must have one entry per dimension")
        if any(a <= 0 for a in self.lengths):
            raise ValueError("domain lengths must be positive")

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, locs: np.ndarray) -> np.ndarray:
        locs = np.atleast_2d(np.asarray(locs, dtype=float))
        ok = np.ones(locs.shape[0], dtype=bool)
        for j, a in enumerate(self.lengths):
            ok &= (locs[:, j] >= 0.0) & (locs[:, j] <= a)
        return ok


@dataclass(frozen=True)
class SpectralBasis:
    """The M smallest Neumann eigenpairs of -Laplacian on a rectangle.

    freqs has shape (M, d) with integer frequencies, xis the eigenvalues
    (ascending), norms the per-function normalization constants so each
    eigenfunction has unit L2 norm on the rectangle.
    """

    domain: RectangleDomain
    M: int
    freqs: np.ndarray
    xis: np.ndarray
    norms: np.ndarray

    def summary_csv(self) -> str:
        buf = io.StringIO()
        cols = ["k"] + [f"freq_{j}" for j in range(self.domain.d)] + ["xi", "norm"]
        buf.write(",".join(cols) + "\n")
        for k in range(self.M):
            row = [str(k + 1)] + [str(int(f)) for f in self.freqs[k]]
            row += [repr(float(self.xis[k])), repr(float(self.norms[k]))]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _lattice_eigs(dom: RectangleDomain, K: int):
    """All eigenpairs on the frequency lattice {0..K}^d, sorted."""
    A = dom.lengths
    if dom.d == 1:
        i = np.arange(K + 1)
        freqs = i[:, None]
        xis = (i / A[0]) ** 2 * math.pi ** 2
    else:
        i, j = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
        freqs = np.column_stack([i.ravel(), j.ravel()])
        xis = ((freqs[:, 0] / A[0]) ** 2 + (freqs[:, 1] / A[1]) ** 2) * math.pi ** 2
    # ascending eigenvalue, ties broken lexicographically on the frequency tuple
    if dom.d == 1:
        order = np.lexsort((freqs[:, 0], xis))
    else:
        order = np.lexsort((freqs[:, 1], freqs[:, 0], xis))
    return freqs[order], xis[order]


def build_basis(dom: RectangleDomain, M: int) -> SpectralBasis:
    """Return the M smallest eigenpairs, deterministic under ties."""
    if M < 1:
        raise ValueError("M must be >= 1")
    aspect = max(dom.lengths) / min(dom.lengths)
    K = math.ceil(math.sqrt(M) * aspect) + 2 if dom.d == 2 else M + 2
    while True:
        freqs, xis = _lattice_eigs(dom, K)
        if len(xis) <= M:
            K *= 2
            continue
        # no omitted lattice frequency may have an eigenvalue below xi_M:
        # the smallest eigenvalue outside {0..K}^d is at (K+1, 0) type corners
        xi_boundary = ((K + 1) / max(dom.lengths)) ** 2 * math.pi ** 2
        if xis[M - 1] <= xi_boundary:
            break
        K *= 2
    freqs, xis = freqs[:M], xis[:M]
    n_zero = np.sum(freqs == 0, axis=1)
    norms = 2.0 ** (dom.d / 2.0 - n_zero / 2.0) / math.sqrt(dom.volume)
    return SpectralBasis(domain=dom, M=M, freqs=freqs, xis=xis, norms=norms)


def eval_basis(b: SpectralBasis, s) -> np.ndarray:
    """Evaluate all M basis functions at a single location."""
    return design_matrix(b, np.atleast_2d(np.asarray(s, dtype=float)))[0]


def design_matrix(b: SpectralBasis, locs) -> np.ndarray:
    """Rows are basis evaluations at each location: shape (n_locs, M)."""
    locs = np.asarray(locs, dtype=float)
    if locs.size == 0:
        return np.zeros((0, b.M))
    locs = np.atleast_2d(locs)
    if locs.shape[1] != b.domain.d:
        raise ValueError(f"locations must be {b.domain.d}-dimensional")
    if not np.all(b.domain.contains(locs)):
        raise ValueError("location outside domain")
    A = b.domain.lengths
    out = np.cos(math.pi * np.outer(locs[:, 0], b.freqs[:, 0]) / A[0])
    if b.domain.d == 2:
        out *= np.cos(math.pi * np.outer(locs[:, 1], b.freqs[:, 1]) / A[1])
    out *= b.norms
    return out
