import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jssl.data import Dataset
from jssl.hazards import NelsonAalenHazard, ZeroHazard

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dataset(rng, n=60, p=2, ties=False, causes=(0, 1, 2)):
    time = rng.exponential(10.0, n)
    if ties:
        time = np.ceil(time)
    status = rng.choice(causes, size=n)
    X = rng.normal(size=(n, p))
    return Dataset(time, status, X)


def step_hazard(rng, n_jumps=5, t_max=10.0, scale=0.3):
    if n_jumps == 0:
        return ZeroHazard()
    jt = np.sort(rng.choice(np.arange(1, 1000) * t_max / 1000, n_jumps, replace=False))
    return NelsonAalenHazard(jt, rng.uniform(0, scale, n_jumps))


class ConstantOccupation:
    """Stub state occupation model with F(t, l, x) fixed; states ordered (-1, 0, 1, 2)."""

    is_step = True

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)

    def grid(self, X):
        return np.empty(0)

    def occupation(self, t, X):
        t = np.atleast_1d(t)
        X = np.atleast_2d(X)
        return np.broadcast_to(self.probs, (X.shape[0], t.shape[0], 4)).copy()


class FixedLearner:
    """Stub learner that ignores its training data."""

    def __init__(self, hazard, name):
        self.hazard = hazard
        self.name = name
        self.calls = 0

    def fit(self, d, target=None, seed=0):
        self.calls += 1
        return self.hazard


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def add(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
        return passed
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
