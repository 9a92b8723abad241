import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cococat import MarketParams, tilted_rate_params, zcb_price
from cococat.errors import ParameterError, SingularParameterError
from cococat.term_structure import (bond_price_from_root, consistent_m_r, simple_forward_rate,
                                    tilted_zcb_price)

PAPER = MarketParams(r0=0.02, theta_r=0.2, sigma_r=0.03, S0=10.0, sigma_S=0.2, rho=-0.5)


def test_bond_at_zero_maturity_is_one():
    assert abs(zcb_price(0.02, 0.0, 0.2, 0.03) - 1.0) <= 1e-12


def test_reference_values():
    assert np.isclose(zcb_price(0.02, 1.0, 0.2, 0.03), 0.99074, atol=5e-6)
    assert np.isclose(zcb_price(0.02, 5.0, 0.2, 0.03), 0.84761, atol=5e-6)


def test_frozen_market_is_exponential():
    assert np.isclose(zcb_price(0.03, 4.0, 0.0, 0.0), np.exp(-0.12), rtol=1e-15)


def test_pde_residual_with_consistent_level():
    """The closed form solves the bond PDE of r = x**2 with the consistent level."""
    th, sg = 0.2, 0.03
    m = consistent_m_r(th, sg)
    r, T, h = 0.03, 2.0, 1e-4
    p = lambda rr, tt: zcb_price(rr, tt, th, sg)
    pt = (p(r, T + h) - p(r, T - h)) / (2 * h)
    pr = (p(r + h, T) - p(r - h, T)) / (2 * h)
    prr = (p(r + h, T) - 2 * p(r, T) + p(r - h, T)) / h**2
    resid = -pt + th * (m - np.sqrt(r)) * pr + 0.5 * sg**2 * r * prr - r * p(r, T)
    assert abs(resid) < 1e-6


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.0, 0.2), t1=st.floats(0.0, 10.0), dt=st.floats(0.01, 5.0))
def test_bond_price_in_unit_interval_and_decreasing(r, t1, dt):
    a, b = zcb_price(r, t1, 0.2, 0.03), zcb_price(r, t1 + dt, 0.2, 0.03)
    assert 0.0 < b <= a <= 1.0 + 1e-15


def test_signed_root_matches_principal_root_for_positive_values():
    assert np.isclose(bond_price_from_root(np.sqrt(0.04), 3.0, 0.2, 0.03),
                      zcb_price(0.04, 3.0, 0.2, 0.03), rtol=1e-15)


def test_simple_forward_rate_inverts_bond():
    rate = simple_forward_rate(0.02, 0.25, 0.2, 0.03)
    assert np.isclose(1.0 / (1.0 + 0.25 * rate), zcb_price(0.02, 0.25, 0.2, 0.03), rtol=1e-14)
    assert PAPER.reference_rate(0.25) == pytest.approx(rate)
    assert dataclasses.replace(PAPER, R0=0.05).reference_rate(0.25) == 0.05


def test_tilted_params_at_nu_one_are_identity():
    th, m, sg = tilted_rate_params(0.2, consistent_m_r(0.2, 0.03), 0.03, 0.2, -0.5, 1.0)
    assert np.isclose(th, 0.2) and np.isclose(sg, 0.03)


def test_tilted_bond_reduces_to_plain_bond_at_nu_one():
    t = np.array([0.5, 2.0, 5.0])
    assert np.allclose(tilted_zcb_price(PAPER, 1.0, t), PAPER.zcb(t), rtol=1e-14)
    assert np.all(tilted_zcb_price(PAPER, 0.0, t) == 1.0)


def test_singular_tilt_raises():
    wild = dataclasses.replace(PAPER, rho=1.0, sigma_S=60.0)
    with pytest.raises(SingularParameterError):
        tilted_zcb_price(wild, 0.5, 1.0)


@pytest.mark.parametrize("kw", [{"r0": -0.1}, {"theta_r": 0.0}, {"rho": 1.5}, {"S0": 0.0},
                                {"m_r": -1.0}])
def test_invalid_market(kw):
    with pytest.raises(ParameterError):
        dataclasses.replace(PAPER, **kw)
