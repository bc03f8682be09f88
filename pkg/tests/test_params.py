import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stmatern.params import (OPT_NAMES, NaturalParams, SpdeParams, from_opt,
                             to_natural, to_opt, to_spde)


def random_natural(rng):
    return NaturalParams(
        nu_t=rng.uniform(0.3, 3.2),
        nu_s=rng.uniform(0.3, 3.0),
        beta_sep=rng.uniform(0.01, 0.99),
        r_t=rng.uniform(0.1, 20.0),
        r_s=rng.uniform(0.05, 3.0),
        sigma=rng.uniform(0.1, 5.0),
        sigma_obs=rng.uniform(0.05, 2.0),
    )


def test_spde_map_reference_point():
    # d=2 worked example: beta* = 0.5, ratio = 0.5
    p = NaturalParams(nu_t=1.0, nu_s=1.0, r_t=10.0, r_s=1.0,
                      beta_sep=0.25, sigma=3.5, sigma_obs=0.35)
    sp = to_spde(p, 2)
    assert sp.gamma == pytest.approx(1.5, abs=1e-12)
    assert sp.alpha == pytest.approx(0.25, abs=1e-12)
    assert sp.beta == pytest.approx(1.5, abs=1e-12)
    assert sp.kappa == pytest.approx(math.sqrt(8.0), abs=1e-12)
    assert sp.r == pytest.approx(10.0 * 8.0 ** 0.25 / math.sqrt(8.0), abs=1e-4)
    assert sp.r == pytest.approx(5.9460, abs=1e-4)


def test_separable_limit():
    p = NaturalParams(nu_t=0.5, nu_s=1.0, r_t=10.0, r_s=1.0,
                      beta_sep=0.0, sigma=3.5, sigma_obs=0.35)
    sp = to_spde(p, 2)
    assert sp.alpha == 0.0
    # beta = nu_s / beta* = nu_s + d/2
    assert sp.beta == pytest.approx(2.0, abs=1e-12)
    assert sp.gamma == pytest.approx(1.0, abs=1e-12)


def test_round_trip_natural_spde():
    rng = np.random.default_rng(42)
    for _ in range(100):
        p = random_natural(rng)
        for d in (1, 2):
            try:
                sp = to_spde(p, d)
            except ValueError:
                continue  # existence violated at this (p, d)
            back = to_natural(sp, d)
            for name in OPT_NAMES:
                assert getattr(back, name) == pytest.approx(
                    getattr(p, name), rel=1e-12, abs=1e-12), name


def test_round_trip_opt():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_natural(rng)
        v = to_opt(p)
        back = from_opt(v)
        for name in OPT_NAMES:
            assert getattr(back, name) == pytest.approx(
                getattr(p, name), rel=1e-12, abs=1e-12), name


@given(v=st.lists(st.floats(-5, 5), min_size=7, max_size=7))
@settings(max_examples=50, deadline=None)
def test_from_opt_always_valid(v):
    p = from_opt(np.array(v))
    # constructor validates; also check the open-box interior
    assert 0.25 < p.nu_t < 3.25
    assert p.nu_s > 0.25
    assert 0.0 < p.beta_sep < 1.0
    w = to_opt(p)
    assert np.allclose(w, v, rtol=1e-9, atol=1e-9)


def test_natural_validation():
    good = dict(nu_t=1.0, nu_s=1.0, r_t=1.0, r_s=1.0, beta_sep=0.5,
                sigma=1.0, sigma_obs=0.5)
    NaturalParams(**good)
    for key, bad in [("nu_t", 0.25), ("nu_t", 3.25), ("nu_s", 0.2),
                     ("r_t", 0.0), ("r_s", -1.0), ("beta_sep", 1.5),
                     ("sigma", 0.001), ("sigma_obs", 0.0)]:
        with pytest.raises(ValueError):
            NaturalParams(**{**good, key: bad})


def test_boundary_beta_sep_rejected_by_transform():
    p = NaturalParams(nu_t=1.0, nu_s=1.0, r_t=1.0, r_s=1.0, beta_sep=0.0,
                      sigma=1.0, sigma_obs=0.5)
    with pytest.raises(ValueError):
        to_opt(p)


def test_existence_condition():
    # d=1, nu_s=0.5 sits exactly on the boundary and is allowed
    p = NaturalParams(nu_t=1.0, nu_s=0.5, r_t=1.0, r_s=0.25, beta_sep=0.25,
                      sigma=1.0, sigma_obs=0.5)
    sp = to_spde(p, 1)
    assert sp.existence_margin == pytest.approx(0.0, abs=1e-12)
    # a strictly negative margin is rejected
    with pytest.raises(ValueError):
        SpdeParams(gamma=0.75, alpha=0.1, beta=0.5, kappa=1.0, r=1.0,
                   C=1.0, sigma=1.0, sigma_obs=0.5)


def test_json_round_trip():
    p = NaturalParams(nu_t=1.25, nu_s=0.75, r_t=3.0, r_s=0.5, beta_sep=0.4,
                      sigma=2.0, sigma_obs=0.3)
    assert NaturalParams.from_json(p.to_json()) == p
