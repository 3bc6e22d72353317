import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_factors(rng, shape, rank, low=0.0):
    return [rng.uniform(low, 1.0, size=(d, rank)) for d in shape]


ACCEPTANCE_LINES = []


def report(criterion: int, ok: bool, detail: str) -> None:
    """Record one acceptance verdict line; all lines are printed after the run."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
