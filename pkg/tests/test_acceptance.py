"""The nine acceptance criteria at their stated tolerances.

Each test runs the corresponding check from ``openbook_spectra.acceptance``,
prints its one-line PASS/FAIL summary and asserts on the pass flag.  The
summaries are collected and repeated in a block at the end of the session.
"""

import pytest

from conftest import ACCEPTANCE_LINES
from openbook_spectra import acceptance


def _run(number):
    res = acceptance.CHECKS[number]()
    line = f"{res.line()} [{res.seconds:.0f} s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return res


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CHECKS))
def test_criterion(number):
    res = _run(number)
    assert res.passed, res.summary
