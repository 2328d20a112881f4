import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plicpos import shapes

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

SHAPE_NAMES = ("cube", "tetra", "dodeca", "torus", "letterA")
CONVEX = ("cube", "tetra", "dodeca")


@pytest.fixture(scope="session")
def polys():
    return {name: shapes.SHAPES[name]() for name in SHAPE_NAMES}


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_unit(rng):
    return unit(rng.normal(size=3))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
