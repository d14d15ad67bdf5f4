import math

import hypothesis
import numpy as np
import pytest

from looseembed.metric import validate_metric

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

C = S = math.sqrt(2) / 2

SPHERE_FLAG6 = np.array([
    (C, S, 0.0), (C, -S, 0.0),
    (C, 0.0, S), (C, 0.0, -S),
    (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
])


def complete(n, d=1):
    return validate_metric([[0 if i == j else d for j in range(n)] for i in range(n)])


@pytest.fixture
def k4():
    return complete(4)


@pytest.fixture
def k5():
    return complete(5)


@pytest.fixture
def triangle():
    return complete(3)


@pytest.fixture
def square():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    return validate_metric(np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)))


@pytest.fixture
def sphere_flag6():
    return SPHERE_FLAG6.copy()


_acceptance = []


@pytest.fixture
def criterion():
    """Record a one-line verdict per acceptance criterion."""
    def record(name, ok, detail=""):
        _acceptance.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _acceptance:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
