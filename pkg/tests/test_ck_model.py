import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openbook_spectra.ck_model import (C_MARGIN, assemble_radial_operator, default_span,
                                       modes_in_gamma_band, mode_sweep, mode_sweep_values, solve_mode,
                                       solve_mode_all, turning_point, turning_points)
from openbook_spectra.errors import ModeSolveError, MultipleEigenvalues
from openbook_spectra.ledger import symmetric_window
from openbook_spectra.perturbation import gaussian_xi
from openbook_spectra.radial import StaggeredGrid


def test_turning_point_flat_zone(profiles):
    # on the flat zone k g = m f gives rho = 2 - V m / k and gamma = 2 k / V
    md = turning_point(profiles, 120, 54)
    assert md.rho_turn == pytest.approx(2 - 2 * 54 / 120, abs=1e-12)
    assert md.gamma == pytest.approx(120.0, rel=1e-12)


def test_operator_shape_and_symmetry(profiles):
    md = turning_point(profiles, 100, 50)
    op = assemble_radial_operator(profiles, md, 100.0, 400)
    assert op.size == 2 * 400 - 1
    H = op.to_dense()
    assert np.array_equal(H, H.T)
    v = np.random.default_rng(0).standard_normal(op.size)
    np.testing.assert_allclose(op.apply(v), H @ v, rtol=1e-13, atol=1e-10)


def test_argument_ranges(profiles):
    md = turning_point(profiles, 100, 50)
    with pytest.raises(ValueError):
        assemble_radial_operator(profiles, md, 100.0, 100)
    with pytest.raises(ValueError):
        assemble_radial_operator(profiles, md, 10.0, 400)
    with pytest.raises(ValueError):
        StaggeredGrid(1.0, 0.5, 10)


@pytest.mark.parametrize("k,m,offset", [(100, 50, 0.0), (120, 57, 6.0), (120, 63, -6.0), (200, 100, 4.0)])
@pytest.mark.parametrize("N", [400, 1000, 4000])
def test_flat_mode_eigenvalue_exact(profiles, k, m, offset, N):
    """Modes deep in the flat zone: the discrete eigenvalue is (r - gamma)/2 for every h."""
    md = turning_point(profiles, k, m)
    r = md.gamma + offset
    pr = solve_mode(profiles, md, r, N)
    assert pr is not None
    assert pr.lam == pytest.approx(0.5 * (r - md.gamma), abs=1e-9)


@pytest.mark.parametrize("k,m", [(200, 100), (200, 95)])
def test_flat_mode_eigenfunction_is_gaussian(profiles, k, m):
    # gamma = 200 keeps the edge leakage of the flat zone far below the h^2 error
    md = turning_point(profiles, k, m)
    errs = []
    for N in (1000, 2000, 4000):
        pr = solve_mode(profiles, md, 200.0, N)
        xi = gaussian_xi(pr.alpha_nodes - md.rho_turn, md.gamma)
        errs.append(math.sqrt(np.sum((pr.alpha - xi) ** 2) * pr.grid_spacing))
        assert pr.beta_l2 < 1e-5
        assert pr.norm == pytest.approx(1.0, abs=1e-12)
    # second order in h
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_local_and_full_grid_agree(profiles):
    md = turning_point(profiles, 37, 56)       # gap-patch mode
    r = md.gamma + 2.0
    loc = solve_mode(profiles, md, r, 2000)
    full = solve_mode(profiles, md, r, 2000, local=False)
    assert loc.lam == pytest.approx(full.lam, abs=1e-9)


@pytest.mark.parametrize("solver", ["shift_invert", "dense"])
def test_solvers_agree(profiles, solver):
    md = turning_point(profiles, 37, 56)
    r = 100.0
    op = assemble_radial_operator(profiles, md, r, 400)
    w0, _ = op.eigenpairs(symmetric_window(r))
    w1, _ = op.eigenpairs(symmetric_window(r), solver)
    np.testing.assert_allclose(w1, w0, rtol=1e-10, atol=1e-10)
    w2 = op.eigenvalues_in(*symmetric_window(r))
    np.testing.assert_allclose(w2, w0, rtol=1e-10, atol=1e-10)


def test_shifted_operator_tracks_r(profiles):
    md = turning_point(profiles, 37, 56)
    a = assemble_radial_operator(profiles, md, 100.0, 400, span=default_span(md))
    b = assemble_radial_operator(profiles, md, 103.0, 400, span=default_span(md))
    np.testing.assert_allclose(a.eigenvalues_in(-20, 20, dr=3.0), b.eigenvalues_in(-20, 20), atol=1e-9)


def test_multiple_window_eigenvalues(profiles):
    md = turning_point(profiles, 0, -108)
    pairs = solve_mode_all(profiles, md, 100.0, 4000)
    assert len(pairs) == 2
    flags = sorted(p.flag for p in pairs)
    assert any("branch" in f for f in flags) and any("branch" not in f for f in flags)
    main = [p for p in pairs if "branch" not in p.flag][0]
    assert abs(main.lam + 4.0) < abs(pairs[0].lam - pairs[1].lam)
    with pytest.raises(MultipleEigenvalues):
        solve_mode(profiles, md, 100.0, 4000)


def test_band_enumeration_matches_brute_force(profiles):
    got = {(m.k, m.m) for m in modes_in_gamma_band(profiles, 95.0, 105.0)}
    k, m = np.meshgrid(np.arange(0, 400), np.arange(-400, 401), indexing="ij")
    k, m = k.ravel(), m.ravel()
    keep = ~((k == 0) & (m == 0))
    k, m = k[keep], m[keep]
    _, gamma = turning_points(profiles, k, m)
    brute = {(int(a), int(b)) for a, b, g in zip(k, m, gamma) if 95.0 <= g <= 105.0}
    assert got == brute


def test_value_sweep_matches_pair_sweep(profiles):
    r = 40.0
    w = symmetric_window(r, "eta")
    a = mode_sweep(profiles, r, 400, w)
    b = mode_sweep_values(profiles, r, 400, w)
    assert len(a) == len(b)
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-9)
    assert [e.flag for e in a.entries] == [e.flag for e in b.entries]
    # main entries sit near (r - gamma)/2 within the margin
    for e in a.entries:
        if "branch" not in e.flag:
            assert abs(e.eigenvalue - 0.5 * (r - e.provenance.gamma)) < C_MARGIN


def test_raise_policy_wraps_mode(profiles):
    with pytest.raises(ModeSolveError) as info:
        mode_sweep_values(profiles, 100.0, 2000, multiple="raise")
    assert isinstance(info.value.cause, MultipleEigenvalues)
    with pytest.raises(ValueError):
        mode_sweep_values(profiles, 100.0, 2000, multiple="ignore")


@given(st.integers(1, 300), st.integers(-150, 150))
@settings(max_examples=40, deadline=None)
def test_turning_point_solves_kg_eq_mf(profiles, k, m):
    md = turning_point(profiles, k, m)
    x = md.rho_turn
    assert 0 < x < 2
    assert abs(k * profiles.g_ck(x) - m * profiles.f_ck(x)) <= 1e-9 * (k + abs(m))
    assert md.gamma == pytest.approx(2 * k / profiles.f_ck(x), rel=1e-12)
