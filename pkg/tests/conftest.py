import itertools

import numpy as np
import pytest

from netscales.graph import TemporalGraph


def compositions(T):
    """All ordered width tuples summing to ``T``."""
    for cuts in itertools.product((False, True), repeat=T - 1):
        widths, run = [], 1
        for c in cuts:
            if c:
                widths.append(run)
                run = 1
            else:
                run += 1
        widths.append(run)
        yield tuple(widths)


def random_graph(rng, N=None, T=None, M=None):
    N = N or int(rng.integers(1, 6))
    T = T or int(rng.integers(1, 15))
    M = int(rng.integers(0, 60)) if M is None else M
    return TemporalGraph(
        N, T, rng.integers(0, N, M), rng.integers(0, N, M), rng.integers(0, T, M)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
