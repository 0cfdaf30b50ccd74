import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from openbook_spectra.ck_model import ModeIndex, modes_in_gamma_band
from openbook_spectra.errors import PartitionFailure, StepMismatch
from openbook_spectra.hat_model import hat_spectrum
from openbook_spectra.ledger import LedgerEntry, SpectrumLedger
from openbook_spectra.profiles import GlobalConstants, conformal_volume
from openbook_spectra.spectral_stats import (build_partition, default_r_grid, eta_ddot, eta_dot, eta_flow_report,
                                             gaussian_tail, hat_n_count, hat_volume, index_sets,
                                             multiplicity_ladder, step_growth_fit, track_spectral_flow,
                                             vafa_witten_check)


def test_gaussian_tail_matches_quadrature():
    c = 0.37
    for lam in (0.1, 1.0, 3.0):
        ref, _ = integrate.quad(lambda s: math.exp(-c * s * s), lam, 5.0)
        assert gaussian_tail(lam, c, 5.0) == pytest.approx(ref, rel=1e-10)


ledgers = st.lists(st.tuples(st.floats(-3.3, 3.3, allow_subnormal=False), st.integers(1, 5)), max_size=40)


@given(ledgers)
@settings(max_examples=60, deadline=None)
def test_eta_antisymmetric_under_negation(items):
    led = SpectrumLedger([LedgerEntry(v, m) for v, m in items], (-3.4, 3.4), 100.0)
    neg = led.negated()
    assert eta_dot(neg, 100.0) == -eta_dot(led, 100.0)
    assert eta_ddot(neg, 100.0) == -eta_ddot(led, 100.0)


@given(ledgers)
@settings(max_examples=30, deadline=None)
def test_eta_vanishes_on_symmetric_ledger(items):
    entries = [LedgerEntry(v, m) for v, m in items]
    entries += [LedgerEntry(-v, m) for v, m in items]
    led = SpectrumLedger(entries, (-3.4, 3.4), 100.0)
    assert eta_dot(led, 100.0) == 0.0
    assert eta_ddot(led, 100.0) == 0.0


def test_eta_ignores_zero_and_outside():
    led = SpectrumLedger.from_values([0.0, 4.0], window=(-5, 5), r=100.0)
    assert eta_dot(led, 100.0) == 0.0


def test_eta_needs_large_r():
    with pytest.raises(ValueError):
        eta_dot(SpectrumLedger.from_values([0.5], r=2.0), 2.0)


def test_hat_eta_zero_at_integer_r_nonzero_otherwise():
    c = GlobalConstants(r=100.0)
    assert eta_dot(hat_spectrum(c), 100.0) == 0.0
    c2 = GlobalConstants(r=100.3)
    assert eta_dot(hat_spectrum(c2), 100.3) != 0.0


def test_partition_single_eigenvalue():
    led = SpectrumLedger.from_values([0.5], window=(-6, 6), r=100.0)
    part = build_partition([led], 100.0)
    assert part.js == list(range(-4, 5))
    assert part.nus == [float(j) for j in part.js]
    # M = 2 floor(4 C r) + 1 with C = 1 -> 801 sub-intervals of length (2/15)/801
    assert part.sub_length == pytest.approx((2 / 15) / 801)


def test_partition_avoids_eigenvalue_at_integer():
    led = SpectrumLedger.from_values([1.0, -2.0], window=(-6, 6), r=100.0)
    part = build_partition([led], 100.0)
    i = part.js.index(1)
    assert part.nus[i] != 1.0
    assert abs(part.nus[i] - 1.0) <= 0.1
    assert part.gaps[i] > part.sub_length
    # ties go left
    assert part.nus[i] < 1.0


def test_partition_window_coverage():
    led = SpectrumLedger.from_values([0.5], window=(-1, 1), r=100.0)
    with pytest.raises(ValueError):
        build_partition([led], 100.0)


def test_partition_failure_on_dense_cluster():
    vals = np.linspace(-1 / 15, 1 / 15, 20001)
    led = SpectrumLedger.from_values(vals, window=(-6, 6), r=100.0)
    with pytest.raises(PartitionFailure):
        build_partition([led], 100.0, C=1.0)


def test_index_sets_hat_counts():
    c = GlobalConstants(r=100.0)
    hat = hat_spectrum(c)
    part = build_partition([hat], 100.0)
    counts = index_sets(SpectrumLedger([], hat.window, 100.0), hat, part, c)
    assert len(counts) == len(part.intervals)
    for row in counts:
        ks = [e.provenance.k for e in hat.entries if row.lo < e.eigenvalue < row.hi]
        assert row.hat == sum(hat_n_count(k, c) for k in ks)
        assert row.ck == 0


def test_hat_n_count_enumeration():
    c = GlobalConstants(r=100.0)
    for k in (0, 1, 99, 100, 101, 200, 250):
        brute = sum(1 for n in range(-400, 1) if Fraction(k, 2) - 100 < n <= 0)
        assert hat_n_count(k, c) == brute


@pytest.mark.parametrize("r", [100.0, 100.3, 57.9])
def test_vafa_witten_exact(r):
    c = GlobalConstants(r=r)
    res = vafa_witten_check(hat_spectrum(c), c)
    assert res.step == 2 * math.floor(r) + 1
    assert res.max_deviation == 0
    assert all(d == 0 for _, d, _ in res.deviations)
    assert res.ladder_matches


def test_vafa_witten_detects_mismatch():
    c = GlobalConstants(r=100.0)
    hat = hat_spectrum(c)
    entries = list(hat.entries)
    e = entries[5]
    entries[5] = LedgerEntry(e.eigenvalue, e.multiplicity, ModeIndex(e.provenance.k + 1, 0, "hat"))
    with pytest.raises(StepMismatch):
        vafa_witten_check(SpectrumLedger(entries, hat.window, 100.0), c)


def test_ladder_formulas_match_enumeration():
    for r in (100.0, 100.3, 250.7):
        rows = multiplicity_ladder(GlobalConstants(r=r))
        assert rows and all(row.matches for row in rows)


def test_step_growth_slope():
    fit = step_growth_fit(2.0, 0.005, [100.0, 200.0, 400.0])
    assert fit.steps == [201, 401, 801]
    assert fit.slope == pytest.approx(2.0)
    assert fit.relative_error < 1e-6


def test_hat_volume(profiles, constants):
    assert hat_volume(profiles) == pytest.approx(4 * math.pi**2 * 2 * constants.sigma, rel=1e-10)


def test_r_grid_validation(profiles):
    g = default_r_grid(50.0)
    assert g[0] == 20.0 and g[-1] == 50.0 and np.all(np.diff(g) <= 1.0)
    with pytest.raises(ValueError):
        track_spectral_flow(profiles, 50.0, r_grid=[20.0, 25.0, 50.0])
    with pytest.raises(ValueError):
        track_spectral_flow(profiles, 50.0, r_grid=[10.0, 11.0])


def test_flow_matches_lattice_count_small_R(profiles):
    fl = track_spectral_flow(profiles, 40.0, N=1000)
    assert fl.tracked_negative == 0
    assert not fl.tracking_losses
    assert fl.lattice_count == len(modes_in_gamma_band(profiles, 0.0, 40.0))
    assert fl.lattice_agrees
    assert fl.predicted == pytest.approx(40.0**2 / (32 * math.pi**2) * conformal_volume(profiles))
    # every crossing happens near r = gamma
    for x in fl.crossings:
        assert abs(x.r_cross - x.gamma) <= fl.max_offset + 1e-9


def test_report_json(profiles):
    c = GlobalConstants(r=100.0)
    hat = hat_spectrum(c)
    ck = SpectrumLedger.from_values([0.25, -1.5], window=hat.window, r=100.0)
    rep = eta_flow_report(c, ck, hat)
    out = rep.to_json()
    assert out["vw_step"] == 201
    assert out["eta_by_model"]["hat"]["eta_dot"] == 0.0
    assert len(out["partition"]) == 9
