import numpy as np
import pytest

from massaspect.chartlab import make_wang_metric
from massaspect.eigenfunctions import BoundaryFunction

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_ball(rng, count, n=3, r_min=0.2, r_max=5.0):
    """Random ball points with geodesic radius uniform in [r_min, r_max]."""
    g = rng.standard_normal((count, n))
    r = rng.uniform(r_min, r_max, count)
    return np.tanh(0.5 * r)[:, None] * g / np.linalg.norm(g, axis=1, keepdims=True)


def at_radius(r, theta):
    theta = np.atleast_2d(theta)
    return np.tanh(0.5 * np.asarray(r, dtype=float)).reshape(-1, 1) * theta


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def wang_const():
    return make_wang_metric(BoundaryFunction.constant(1.0, 3))


@pytest.fixture(scope="session")
def wang_dipole():
    return make_wang_metric(BoundaryFunction.callback(lambda th: 1.0 + 0.5 * th[..., 0], 3))
