import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsscrit.errors import ParameterError, WindowError
from fsscrit.larged import (
    SQRT2,
    _fit,
    critical_charge,
    effective_energy,
    field_for_asymmetry,
    hessian,
    minimize_ground,
    susceptibility,
    susceptibility_fd,
    symmetric_energy,
    symmetric_hessian_min,
    symmetric_radius,
)


def test_energy_substitution():
    assert effective_energy(1.0, 1.0, 1.0) == pytest.approx(-1 + 1 / math.sqrt(2), abs=1e-15)
    with pytest.raises(ParameterError):
        effective_energy(0.0, 1.0, 1.0)


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.5, 3), st.floats(-1, 1))
def test_mirror_symmetry_of_energy(r1, r2, z, eps):
    assert effective_energy(r1, r2, z, eps) == pytest.approx(effective_energy(r2, r1, z, -eps), rel=1e-13, abs=1e-13)


def test_symmetric_closed_form():
    r = symmetric_radius(2.0)
    assert r == pytest.approx(2 / (4 - 1 / math.sqrt(2)))
    assert symmetric_energy(2.0) == pytest.approx(-2.71078, abs=1e-5)
    assert effective_energy(r, r, 2.0) == pytest.approx(symmetric_energy(2.0), rel=1e-14)


def test_hessian_matches_finite_differences():
    r1, r2, z, h = 1.3, 0.9, 1.2, 1e-5
    num = np.zeros((2, 2))
    x = np.array([r1, r2])
    for i in range(2):
        for j in range(2):
            ei, ej = np.eye(2)[i] * h, np.eye(2)[j] * h
            f = lambda d: effective_energy(*(x + d), z)  # noqa: E731
            num[i, j] = (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4 * h * h)
    np.testing.assert_allclose(hessian(r1, r2, z), num, atol=1e-5)


def test_symmetric_ground_state():
    s = minimize_ground(2.0)
    assert s.eta == 0.0
    assert s.energy == pytest.approx(-2.71078, abs=1e-5)
    assert s.hess_min > 0


def test_boundary_point():
    s = minimize_ground(SQRT2)
    assert s.eta == 0.0
    assert abs(s.hess_min) < 1e-8


def test_broken_phase():
    s = minimize_ground(1.2)
    assert s.eta > 0.1
    assert s.r1 > s.r2 > 0
    assert min(s.hessian_eigs) >= 0
    assert s.energy < symmetric_energy(1.2)


def test_ionisation_limit_at_unit_charge():
    s = minimize_ground(1.0)
    assert s.r1 == math.inf and s.eta == 1.0
    assert s.energy == -0.5
    near = minimize_ground(1.001)
    assert near.energy < s.energy and near.eta > 0.99


def test_escaping_electron_is_a_numerical_error():
    from fsscrit.errors import NumericalError

    with pytest.raises(NumericalError):
        minimize_ground(1.0, 0.03)


def test_rejects_small_charge():
    with pytest.raises(ParameterError):
        minimize_ground(0.5)


def test_critical_charge():
    zc = critical_charge()
    assert zc == pytest.approx(math.sqrt(2), abs=1e-6)
    assert symmetric_hessian_min(1.5) > 0
    assert symmetric_hessian_min(1.3) < 0


@settings(max_examples=15, deadline=None)
@given(st.floats(1.3, 1.8), st.floats(1e-6, 1e-3))
def test_mirror_states(z, eps):
    # the field makes the outer electron metastable; these fields keep it bound
    up, down = minimize_ground(z, eps), minimize_ground(z, -eps)
    assert np.sign(up.eta) == -np.sign(down.eta)
    assert up.energy == pytest.approx(down.energy, abs=1e-12)
    assert up.r1 == pytest.approx(down.r2, rel=1e-10)


def test_order_parameter_continuity():
    zs = SQRT2 - np.logspace(-1, -6, 30)
    eta = np.array([minimize_ground(z).eta for z in zs])
    assert np.all(np.diff(eta) < 0)
    assert eta[-1] < 5e-3
    assert minimize_ground(1.5).eta == 0.0


def test_susceptibility_step_robust():
    for z in (1.42414, 1.5):
        a, b = susceptibility_fd(z, 1e-6), susceptibility_fd(z, 1e-7)
        assert a == pytest.approx(b, rel=5e-4)
        assert susceptibility(z) == pytest.approx(a, rel=1e-5)


def test_field_for_asymmetry_is_stationary():
    eps, r = field_for_asymmetry(0.05, SQRT2)
    s = minimize_ground(SQRT2, eps)
    assert s.eta == pytest.approx(0.05, rel=1e-8)
    assert s.r1 == pytest.approx(r, rel=1e-8)


def test_window_errors():
    x = np.logspace(-4, -2, 5)
    with pytest.raises(WindowError):
        _fit(x, x, "few")
    x = np.logspace(-3, -2, 10)
    with pytest.raises(WindowError):
        _fit(x, x, "narrow")
