import numpy as np
import pytest

from openbook_spectra.hat_model import (assemble_hat_operator, hat_discrete_check, hat_spectrum,
                                        hat_turning_point, kernel_element, kernel_elements, kernel_residual,
                                        multiplicity, verify_kernel_dimension)
from openbook_spectra.ledger import symmetric_window
from openbook_spectra.profiles import GlobalConstants


def test_ledger_at_r100(constants):
    # k in {89, ..., 111}: 23 distinct eigenvalues r/2 - k/V, each 2[r]+1 = 201 times
    led = hat_spectrum(constants)
    assert len(led) == 23
    assert sorted(e.provenance.k for e in led.entries) == list(range(89, 112))
    assert set(led.multiplicities) == {201}
    np.testing.assert_allclose(sorted(led.eigenvalues), sorted(50 - np.arange(89, 112) / 2))


def test_ledger_symmetric_at_integer_r():
    for r in (100.0, 400.0):
        led = hat_spectrum(GlobalConstants(r=r), symmetric_window(r, "eta"))
        np.testing.assert_array_equal(np.sort(led.eigenvalues), np.sort(-led.eigenvalues))


def test_multiplicity_non_integer_r():
    assert multiplicity(GlobalConstants(r=100.7)) == 201


@pytest.mark.parametrize("k", [90, 100, 111])
def test_kernel_dimension(profiles, constants, k):
    assert verify_kernel_dimension(profiles, constants, k, 2000) == 2 * constants.floor_r + 1


def test_turning_point_ends(profiles, constants):
    fr = constants.floor_r
    assert hat_turning_point(profiles, constants, 100, 0) == 0.0
    assert hat_turning_point(profiles, constants, 100, -2 * fr) == 2.0
    x = hat_turning_point(profiles, constants, 100, -fr)
    assert 0 < x < 2
    with pytest.raises(ValueError):
        hat_turning_point(profiles, constants, 100, 1)
    with pytest.raises(ValueError):
        hat_turning_point(profiles, constants, 100, -2 * fr - 1)


def test_kernel_elements_shared_integrals_agree(profiles, constants):
    many = kernel_elements(profiles, constants, 100, 1000, n_values=[-10, -100, -150])
    for el in many:
        one = kernel_element(profiles, constants, 100, el.n, 1000)
        np.testing.assert_allclose(el.samples, one.samples, rtol=1e-12, atol=1e-300)
        assert el.norm() == pytest.approx(1.0, abs=1e-8)


def test_kernel_element_solves_ode(profiles, constants):
    el = kernel_element(profiles, constants, 100, -100, 2000)
    assert kernel_residual(el, profiles, constants) < 1e-5


@pytest.mark.parametrize("n", [0, -50, -100, -200])
def test_discrete_coupled_system(profiles, constants, n):
    k = 95
    pr = hat_discrete_check(profiles, constants, k, n, 2000)
    assert pr.lam == pytest.approx(constants.r / 2 - k / constants.V, abs=1e-9)
    assert pr.beta_l2 < 1e-10


def test_hat_operator_symmetric(profiles, constants):
    op = assemble_hat_operator(profiles, constants, 100, -100, 300)
    H = op.to_dense()
    assert np.array_equal(H, H.T)
