import pytest

from solitonlab.geometry import OrbitPreset, preset_catalog


@pytest.fixture
def s5():
    return preset_catalog("s5")


@pytest.fixture
def cp2():
    return preset_catalog("cp2")


@pytest.fixture
def gaussian_preset():
    # R^3 x S^2 with epsilon/2 = -4
    return preset_catalog("s2xs2")


def make_preset(d1, d2, c_q, a2, epsilon=-1.0, collapse="SameEnd"):
    return OrbitPreset("custom", d1, d2, c_q, a2, epsilon, collapse)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
