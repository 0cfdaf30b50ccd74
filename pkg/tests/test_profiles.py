import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openbook_spectra.errors import ConfigError
from openbook_spectra.profiles import (TABLE_COLUMNS, CutoffFunction, GlobalConstants, build_profiles,
                                       conformal_volume)


def test_flat_zone_closed_forms(profiles, constants):
    fw = constants.flat_halfwidth
    x = np.linspace(1 - fw, 1 + fw, 41)
    np.testing.assert_allclose(profiles.f_ck(x), constants.V, atol=1e-13)
    np.testing.assert_allclose(profiles.g_ck(x), 2 - x, atol=1e-13)
    # Delta = (f'g - fg')/2 = V/2 there
    np.testing.assert_allclose(profiles.delta_ck(x), constants.V / 2, atol=1e-12)


def test_pole_forms(profiles, constants):
    x = np.linspace(0, constants.pole_extent, 11)
    np.testing.assert_allclose(profiles.f_ck(x), x**2, atol=1e-13)
    np.testing.assert_allclose(profiles.g_ck(x), 2 - x**2, atol=1e-13)
    u = 2 - np.linspace(2 - constants.pole_extent, 2, 11)
    np.testing.assert_allclose(profiles.f_ck(2 - u), u**2, atol=1e-12)


def test_contact_condition_positive(profiles):
    x = np.linspace(1e-3, 2 - 1e-3, 20001)
    assert np.all(profiles.delta_ck(x) > 0)


def test_c2_across_breakpoints(profiles):
    for prof in (profiles.f_ck, profiles.g_ck, profiles.h_hat, profiles.g_hat):
        for b in prof.breakpoints[1:-1]:
            for nu in range(3):
                left, right = prof(b - 1e-12, nu), prof(b + 1e-12, nu)
                assert abs(left - right) <= 1e-6 * max(1.0, abs(left)), (prof.name, b, nu)


def test_hat_profile_endpoints(profiles, constants):
    # h runs from 0 to 2 sigma monotonically
    assert profiles.h_hat(0.0) == pytest.approx(0.0, abs=1e-14)
    assert profiles.h_hat(2.0) == pytest.approx(2 * constants.sigma, abs=1e-12)
    x = np.linspace(0, 2, 2001)
    assert np.all(np.diff(profiles.h_hat(x)) >= -1e-15)


def test_conformal_volume_matches_lattice_count(profiles):
    # #{gamma <= R} is asymptotically R^2 vol / (32 pi^2); the lattice count at
    # R = 400 is 203524 (enumerated independently during development)
    vol = conformal_volume(profiles)
    assert vol == pytest.approx(400.7578, rel=1e-5)
    assert 400.0**2 * vol / (32 * math.pi**2) == pytest.approx(203524, rel=5e-3)


def test_rho_v_is_flat_centre(profiles):
    # V g = f at rho = 1 when f = V, g = 2 - rho
    assert profiles.rho_V() == pytest.approx(1.0, abs=1e-12)


def test_table_shape(profiles):
    tbl = profiles.table(11)
    assert tbl.shape == (11, len(TABLE_COLUMNS))


@pytest.mark.parametrize("kw", [dict(V=0.0), dict(delta=0.0), dict(delta=0.02), dict(r=-1.0),
                                dict(pole_fraction=0.6, flat_fraction=0.5)])
def test_invalid_constants(kw):
    with pytest.raises(ConfigError):
        GlobalConstants(**kw)


def test_sigma_and_floor():
    c = GlobalConstants(r=100.3)
    assert c.floor_r == 100
    assert c.sigma == pytest.approx(100 / 100.3)


@given(st.floats(0.5, 8.0), st.floats(0.001, 0.009))
@settings(max_examples=8, deadline=None)
def test_construction_over_parameters(V, delta):
    p = build_profiles(GlobalConstants(V=V, delta=delta, r=50.0))
    x = np.linspace(1e-3, 2 - 1e-3, 4001)
    assert np.all(p.delta_ck(x) > 0)


def test_cutoff_function():
    cut = CutoffFunction(1.0, 0.1, 0.3)
    assert cut(1.05) == 1.0 and cut(1.35) == 0.0
    x = np.linspace(0.5, 1.5, 2001)
    fd = np.gradient(cut(x), x)
    np.testing.assert_allclose(cut(x, 1), fd, atol=2e-3 * 30)
    with pytest.raises(ConfigError):
        CutoffFunction(1.0, 0.3, 0.1)
