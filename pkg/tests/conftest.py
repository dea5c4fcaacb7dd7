import numpy as np
import pytest

from mmot.measures import DiscreteMarginal, ProductSpace

ACCEPTANCE_LINES = []


def random_marginal(rng, n, d=1, low=0.1):
    w = rng.random(n) + low
    pts = rng.random((n, d))
    return DiscreteMarginal(pts, w / w.sum(), d)


def random_space(rng, m, n, d=1):
    ns = [n] * m if np.isscalar(n) else list(n)
    return ProductSpace(tuple(random_marginal(rng, k, d) for k in ns))


def sorted_marginal(rng, n):
    pts = np.sort(rng.random(n))
    while np.any(np.diff(pts) <= 0):
        pts = np.sort(rng.random(n))
    w = rng.random(n) + 0.05
    return DiscreteMarginal(pts[:, None], w / w.sum(), 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
