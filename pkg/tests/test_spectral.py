import math

import numpy as np
import pytest
from scipy import integrate

from stmatern.spectral import (RectangleDomain, build_basis, design_matrix,
                               eval_basis)


def test_domain_validation():
    with pytest.raises(ValueError):
        RectangleDomain(3, (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        RectangleDomain(2, (1.0,))
    with pytest.raises(ValueError):
        RectangleDomain(1, (0.0,))


def test_eigenvalues_sorted_and_deterministic():
    dom = RectangleDomain(2, (1.0, 1.0))
    b = build_basis(dom, 64)
    assert np.all(np.diff(b.xis) >= 0)
    # tie (1,0) vs (0,1) on the square broken lexicographically
    k10 = np.flatnonzero((b.freqs == [1, 0]).all(axis=1))[0]
    k01 = np.flatnonzero((b.freqs == [0, 1]).all(axis=1))[0]
    assert k01 < k10
    b2 = build_basis(dom, 64)
    assert np.array_equal(b.freqs, b2.freqs)


def test_first_eigenpair_is_constant_mode():
    dom = RectangleDomain(2, (2.0, 3.0))
    b = build_basis(dom, 16)
    assert b.xis[0] == 0.0
    assert np.all(b.freqs[0] == 0)
    # constant mode has value 1/sqrt(|D|)
    assert eval_basis(b, [0.3, 0.7])[0] == pytest.approx(
        1.0 / math.sqrt(6.0), abs=1e-14)


def test_anisotropic_rectangle_eigenvalues():
    dom = RectangleDomain(2, (2.0, 1.0))
    b = build_basis(dom, 32)
    for k in range(b.M):
        i, j = b.freqs[k]
        xi = math.pi ** 2 * ((i / 2.0) ** 2 + (j / 1.0) ** 2)
        assert b.xis[k] == pytest.approx(xi, rel=1e-14)
    # the smallest omitted eigenvalue must not undercut the kept ones
    big = build_basis(dom, 200)
    assert big.xis[31] == pytest.approx(b.xis[31], rel=1e-14)


@pytest.mark.parametrize("lengths,d", [((1.0,), 1), ((2.0, 3.0), 2)])
def test_orthonormality_by_quadrature(lengths, d):
    dom = RectangleDomain(d, lengths)
    b = build_basis(dom, 6)
    for k in range(6):
        for l in range(k, 6):
            if d == 1:
                val, _ = integrate.quad(
                    lambda x: eval_basis(b, [x])[k] * eval_basis(b, [x])[l],
                    0.0, lengths[0], limit=200)
            else:
                val, _ = integrate.dblquad(
                    lambda y, x: (eval_basis(b, [x, y])[k]
                                  * eval_basis(b, [x, y])[l]),
                    0.0, lengths[0], 0.0, lengths[1])
            assert val == pytest.approx(1.0 if k == l else 0.0, abs=1e-9)


def test_neumann_derivative_zero_at_boundary():
    dom = RectangleDomain(1, (1.0,))
    b = build_basis(dom, 8)
    eps = 1e-6
    for edge in (0.0, 1.0):
        inner = eval_basis(b, [abs(edge - eps)])
        at_edge = eval_basis(b, [edge])
        # cosine modes are flat at the boundary: deviation is O(eps^2)
        assert np.all(np.abs(inner - at_edge) < 1e-9)


def test_design_matrix_matches_eval():
    dom = RectangleDomain(2, (1.0, 1.0))
    b = build_basis(dom, 20)
    locs = np.random.default_rng(0).uniform(0, 1, size=(5, 2))
    H = design_matrix(b, locs)
    for i in range(5):
        assert np.allclose(H[i], eval_basis(b, locs[i]))
    assert design_matrix(b, np.zeros((0, 2))).shape == (0, 20)


def test_design_matrix_rejects_outside():
    dom = RectangleDomain(2, (1.0, 1.0))
    b = build_basis(dom, 4)
    with pytest.raises(ValueError):
        design_matrix(b, [[1.5, 0.5]])


def test_summary_csv_shape():
    dom = RectangleDomain(2, (1.0, 1.0))
    b = build_basis(dom, 9)
    lines = b.summary_csv().strip().splitlines()
    assert lines[0] == "k,freq_0,freq_1,xi,norm"
    assert len(lines) == 10
