import hypothesis
import numpy as np
import pytest

from fermibundle import confspace as C

hypothesis.settings.register_profile("default", max_examples=30, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def _record(label: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pair33():
    return C.build_pair(C.LatticeBox.cube(2, 3), 2)


@pytest.fixture(scope="session")
def pair44():
    return C.build_pair(C.LatticeBox.cube(2, 4), 2)


@pytest.fixture(scope="session")
def pair33n3():
    return C.build_pair(C.LatticeBox.cube(2, 3), 3)


@pytest.fixture(scope="session")
def pair3d():
    return C.build_pair(C.LatticeBox.cube(3, 2), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
