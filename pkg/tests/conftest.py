import pytest

from openbook_spectra.profiles import GlobalConstants, build_profiles

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def constants():
    return GlobalConstants(V=2.0, delta=0.005, r=100.0)


@pytest.fixture(scope="session")
def profiles(constants):
    return build_profiles(constants)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
