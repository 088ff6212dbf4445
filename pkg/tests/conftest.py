import time

import numpy as np
import pytest

from fuzzygrad.data import load_iris, range_normalize
from fuzzygrad.training import IRIS_TEMPLATE, IRIS_THETA0, TrainConfig, build_iris_fis, train


@pytest.fixture(scope="session")
def iris():
    return load_iris()


@pytest.fixture(scope="session")
def iris_matrix(iris):
    x, _ = range_normalize(iris.features, iris.feature_names)
    return np.column_stack([x, iris.target])


@pytest.fixture(scope="session")
def iris_x(iris_matrix):
    return iris_matrix[:, :2]


@pytest.fixture(scope="session")
def initial_fis():
    return build_iris_fis(IRIS_THETA0, IRIS_THETA0)


@pytest.fixture(scope="session")
def timed_full_run(iris_matrix):
    """The full 100-epoch, stepsize 0.3 run and its wall time; shared because it takes seconds."""
    t0 = time.perf_counter()
    result = train(IRIS_TEMPLATE, iris_matrix, TrainConfig(epochs=100, stepsize=0.3, grid_points=501))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def full_run(timed_full_run):
    return timed_full_run[0]


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
