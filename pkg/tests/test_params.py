import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lqglab.params import (
    GAMMA_PURE_GRAVITY,
    CoalescenceConfig,
    LqgParams,
    check_alpha,
    normalization_exponent,
    psi,
    variation_exponent,
)

gammas = st.floats(min_value=1e-3, max_value=2 - 1e-3)


def test_psi_examples():
    for g in (0.5, 1.0, 1.5, GAMMA_PURE_GRAVITY):
        assert psi(g, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert psi(g, 0.0) == 0.0
        assert psi(g, 4.0 / g**2) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("g", [0.0, 2.0, -1.0, 2.5, float("nan")])
def test_psi_rejects_gamma(g):
    with pytest.raises(ValueError):
        psi(g, 1.0)


def test_default_params():
    p = LqgParams()
    assert p.gamma == GAMMA_PURE_GRAVITY and p.gamma_prime == p.gamma and p.d_gamma == 4.0
    assert p.xi == p.gamma / p.d_gamma
    assert p.q == p.gamma / 2 + 2 / p.gamma
    assert p.q == pytest.approx(5 / math.sqrt(6), abs=1e-15)


def test_dimension_required_off_pure_gravity():
    with pytest.raises(ValueError, match="d_gamma"):
        LqgParams(gamma=1.0)
    with pytest.raises(ValueError):
        LqgParams(gamma=1.0, d_gamma=2.0)
    with pytest.raises(ValueError):
        LqgParams(gamma=1.0, gamma_prime=2.0, d_gamma=3.0)


def test_variation_exponent_examples():
    assert variation_exponent(LqgParams()) == pytest.approx(2.0, abs=1e-15)
    assert variation_exponent(LqgParams(1.0, 1.0, 3.3)) == pytest.approx(1.65)
    assert variation_exponent(LqgParams(1.0, 0.5, 2.5)) == pytest.approx(0.625, abs=1e-15)


def test_normalization_exponent_examples():
    assert normalization_exponent(LqgParams()) == pytest.approx(0.0, abs=1e-15)
    assert normalization_exponent(LqgParams(1.0, 0.5, 2.5)) == pytest.approx(0.4375, abs=1e-15)


@given(gammas, gammas)
def test_psi_identity(g, gp):
    p = LqgParams(g, gp, 3.0)
    assert abs(psi(g, gp / g) - (gp * p.q / 2 - gp**2 / 4)) <= 1e-12
    assert abs(normalization_exponent(p) - gp * (p.q_prime - p.q) / 2) <= 1e-12


@given(gammas, gammas)
def test_normalization_sign(g, gp):
    # Q' - Q = (g' - g)(1/2 - 2/(g g')) has the sign of g - g'
    p = LqgParams(g, gp, 3.0)
    if abs(g - gp) > 1e-6:
        assert np.sign(normalization_exponent(p)) == np.sign(g - gp)


@given(gammas)
def test_psi_minus_one_positive_inside_range(gp):
    ps = np.linspace(1, 4 / gp**2, 50)[1:-1]
    assert all(psi(gp, p) - 1 > 0 for p in ps)


def test_check_alpha_examples():
    p = LqgParams()
    assert check_alpha(CoalescenceConfig(0.25, 0.5), p)
    assert not check_alpha(CoalescenceConfig(0.25, 0.7), p)
    assert check_alpha(CoalescenceConfig(1e-6, 2e-6), LqgParams(1.9, 0.1, 2.2))


def test_coalescence_config_validation():
    with pytest.raises(ValueError):
        CoalescenceConfig(0.5, 0.25)
    with pytest.raises(ValueError):
        CoalescenceConfig(0.25, 1.0)
    with pytest.raises(ValueError):
        CoalescenceConfig(0.25, 0.5, annulus_ratio=1.0)
    c = CoalescenceConfig()
    assert c.radius_budget(4) == 0.25 and c.containment_radius(4) == 0.5
