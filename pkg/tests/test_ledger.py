import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openbook_spectra.ck_model import ModeIndex
from openbook_spectra.ledger import LedgerEntry, SpectrumLedger, symmetric_window, window_radius


def test_sorted_with_ties_by_label():
    e = [LedgerEntry(1.0, 1, ModeIndex(3, 1)), LedgerEntry(-2.0, 2, ModeIndex(1, 1)),
         LedgerEntry(1.0, 1, ModeIndex(2, 5))]
    led = SpectrumLedger(e)
    assert list(led.eigenvalues) == [-2.0, 1.0, 1.0]
    assert [x.provenance.k for x in led.entries] == [1, 2, 3]
    assert led.total == 4
    np.testing.assert_array_equal(led.expanded(), [-2.0, -2.0, 1.0, 1.0])


def test_window_and_multiplicity_checks():
    with pytest.raises(ValueError):
        SpectrumLedger([LedgerEntry(5.0, 1)], (-1.0, 1.0))
    with pytest.raises(ValueError):
        SpectrumLedger([LedgerEntry(0.0, 0)])


def test_windows():
    assert window_radius(300.0) == pytest.approx(10.0)
    assert window_radius(900.0, "eta") == pytest.approx(10.0)
    assert symmetric_window(27.0) == pytest.approx((-3.0, 3.0))
    with pytest.raises(ValueError):
        window_radius(10.0, "prop")


@given(st.lists(st.tuples(st.floats(-5, 5), st.integers(1, 4)), max_size=30))
@settings(max_examples=50, deadline=None)
def test_negation_involution(items):
    led = SpectrumLedger([LedgerEntry(v, m) for v, m in items], (-5, 5))
    twice = led.negated().negated()
    np.testing.assert_array_equal(twice.eigenvalues, led.eigenvalues)
    assert led.negated().total == led.total
    assert led.count_in(-1, 1) == led.negated().count_in(-1, 1)
