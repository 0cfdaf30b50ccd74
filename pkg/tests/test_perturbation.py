import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy import integrate
from scipy.interpolate import PPoly

from openbook_spectra.ck_model import turning_point
from openbook_spectra.errors import HypothesisViolation, ZoneViolation
from openbook_spectra.perturbation import (TaylorCoefficients, certify_eigenvalues, continuum_residual,
                                           gaussian_moment, norm_deficit, numeric_eigenvalue,
                                           perturbative_mode, recursive_solution, solve_b, taylor_extract,
                                           width_cutoff)
from openbook_spectra.acceptance import planted_problem, tight_eps
from openbook_spectra.profiles import GlobalConstants, Profile, ProfileSet, build_profiles


@pytest.mark.parametrize("i", range(0, 9))
def test_gaussian_moments(i):
    gamma = 3.7
    ref, _ = integrate.quad(lambda x: x**i * math.exp(-gamma * x * x), -np.inf, np.inf)
    assert gaussian_moment(i, gamma) == pytest.approx(ref, rel=1e-10, abs=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(0.5, 200))
@settings(max_examples=40, deadline=None)
def test_solve_b_inverts_operator(coefs, gamma):
    b_true = np.array(coefs)
    # s = (-d/dx + 2 gamma x) b_true
    s = P.polysub(P.polymulx(2 * gamma * b_true), P.polyder(b_true))
    b = solve_b(s, gamma)
    n = max(len(b), len(b_true))
    np.testing.assert_allclose(np.pad(b, (0, n - len(b))), np.pad(b_true, (0, n - len(b_true))),
                               atol=1e-9 * max(1.0, np.abs(b_true).max()))


def test_linear_model_has_no_corrections():
    sol = recursive_solution(TaylorCoefficients.zeros(150.0), 150.0, 160.0)
    np.testing.assert_allclose(sol.mu_terms, 0.0, atol=1e-14)
    assert sol.mu_total == pytest.approx(5.0)
    np.testing.assert_allclose(sol.a_sum(), [1.0], atol=1e-14)
    np.testing.assert_allclose(sol.b_sum(), [0.0], atol=1e-14)


def test_flat_mode_perturbation_is_exact(profiles):
    md = turning_point(profiles, 120, 57)
    sol = perturbative_mode(profiles, md, 125.0)
    np.testing.assert_allclose(sol.mu_terms, 0.0, atol=1e-10)


def test_zone_guard(profiles):
    with pytest.raises(ZoneViolation):
        taylor_extract(profiles, turning_point(profiles, 1, 200))


def _gentle_profiles():
    """Analytic f, g with non-trivial Taylor data everywhere near rho = 1."""
    c = GlobalConstants()
    base = build_profiles(c)
    x = Polynomial([-1.0, 1.0])

    def single(poly):
        coef = poly.coef[::-1][:, None]
        return Profile(PPoly(np.vstack([np.zeros((8 - len(coef), 1)), coef]), [0.0, 2.0]))

    f = single(2 + 0.6 * x + 0.3 * x**2 + 0.1 * x**3)
    g = single(2 - Polynomial([0.0, 1.0]) + 0.2 * x**2)
    return ProfileSet(c, f, g, base.g_hat, base.h_hat)


@pytest.fixture(scope="module")
def gentle():
    return _gentle_profiles()


def _offset_mode(p, r):
    k = round((r + 1.5 * math.sqrt(r)) * p.f_ck(1.0) / 2)
    m = round(k * p.g_ck(1.0) / p.f_ck(1.0))
    return turning_point(p, k, m)


def test_recursion_oracle_on_analytic_profile(gentle):
    """Sixth-order eigenvalue against Richardson-extrapolated numerics.

    Gamma differs from r here, so the 2 mu_0 coupling in the recursion is
    exercised.  The gap must be tiny and shrink faster than r^-2.5.
    """
    gaps = []
    for r in (100.0, 400.0):
        md = _offset_mode(gentle, r)
        sol = perturbative_mode(gentle, md, r)
        lam, vals = numeric_eigenvalue(gentle, md, r, 2e-4)
        gaps.append(abs(lam - sol.mu_total))
        # truncation at lower order is visibly worse
        assert abs(lam - sol.mu_truncated(2)) > gaps[-1]
    assert gaps[0] < 1e-8
    assert gaps[1] < gaps[0] * 4.0**-2.5


def test_continuum_residual_decays(gentle):
    res = []
    for r in (100.0, 400.0):
        md = _offset_mode(gentle, r)
        sol = perturbative_mode(gentle, md, r)
        res.append(continuum_residual(gentle, md, sol, width_cutoff(md)))
        # the ansatz is normalized only to leading order (a_j(0) = 0 convention)
        assert norm_deficit(sol, width_cutoff(md)) < 1e-2
    assert res[1] < res[0] * 4.0**-5


# ----------------------------------------------------------------------------
# certifier
# ----------------------------------------------------------------------------

@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_planted_pairs_certify(seed):
    rng = np.random.default_rng(seed)
    H, vecs, mus, d_true = planted_problem(rng)
    eps1, eps2 = tight_eps(H, vecs, mus)
    out = np.array(certify_eigenvalues(H, list(zip(vecs.T, mus)), eps1, eps2))
    assert np.all(np.abs(out - mus) <= 4 * math.sqrt(eps1))
    np.testing.assert_allclose(np.sort(out), d_true, atol=1e-12)


def test_violations_name_hypothesis():
    rng = np.random.default_rng(1)
    H, vecs, mus, _ = planted_problem(rng, L=1)
    eps1, eps2 = tight_eps(H, vecs, mus)
    pairs = list(zip(vecs.T, mus))
    with pytest.raises(HypothesisViolation) as e:
        certify_eigenvalues(H, pairs, eps1, 0.25)
    assert e.value.hypothesis == "i"
    with pytest.raises(HypothesisViolation) as e:
        certify_eigenvalues(H, [(3 * vecs[:, 0], mus[0])], eps1, 0.1)
    assert e.value.hypothesis == "ii"
    with pytest.raises(HypothesisViolation) as e:
        certify_eigenvalues(H, [(vecs[:, 0], mus[0] + 0.1)], eps1, eps2)
    assert e.value.hypothesis == "iii"


def test_all_four_hypotheses_reported():
    from openbook_spectra.acceptance import _violation_names
    assert _violation_names(np.random.default_rng(3)) == ["i", "ii", "iii", "iv"]


def test_rejects_asymmetric_operator():
    H = np.diag([1.0, 2.0])
    H[0, 1] = 0.1
    with pytest.raises(ValueError):
        certify_eigenvalues(H, [(np.array([1.0, 0.0]), 1.0)], 1.0, 0.1)
