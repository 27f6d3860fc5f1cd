import numpy as np
import pytest

from gpdp import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def two_bump_sample(rng, n):
    """Mixture of N(0.3, 0.1^2) and N(0.7, 0.1^2), the two-bump test data."""
    centers = np.where(rng.uniform(size=n) < 0.5, 0.3, 0.7)
    return (centers + 0.1 * rng.standard_normal(n))[:, None]


def adjacent_kde_pair(rng, n, d, low=0.0, high=1.0):
    """Dataset uniform on a box and a neighbour with the last record redrawn."""
    pts = rng.uniform(low, high, size=(n, d))
    data = Dataset(pts)
    return data, data.replace(n - 1, rng.uniform(low, high, size=d))


def adjacent_classification_pair(rng, n, d):
    """Noisy linearly separable labels; the neighbour swaps one full record."""
    x = rng.uniform(size=(n, d))
    w = rng.standard_normal(d)
    y = np.sign((x - 0.5) @ w + 0.2 * rng.standard_normal(n))
    y[y == 0] = 1.0
    data = Dataset(x, y)
    return data, data.replace(n - 1, rng.uniform(size=d), rng.choice([-1.0, 1.0]))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
