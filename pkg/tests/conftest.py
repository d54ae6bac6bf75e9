import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rand_sym(rng, d):
    G = rng.standard_normal((d, d))
    return 0.5 * (G + G.T)


def rand_psd(rng, d, r):
    G = rng.standard_normal((d, r))
    return G @ G.T


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """Record a one-line verdict for an acceptance criterion."""
    def record(number, title, passed, detail=""):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
