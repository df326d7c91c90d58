import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


class Batch:
    """Just the time/event columns a loss or metric needs."""

    def __init__(self, time, event):
        self.time = np.asarray(time, dtype=float)
        self.event = np.asarray(event, dtype=int)

    def __len__(self):
        return len(self.time)


def make_batch(time, event):
    return Batch(time, event)


def random_batch(rng, n=32, n_events=8, ties=False):
    time = rng.integers(1, 8, size=n).astype(float) if ties else rng.uniform(1.0, 100.0, size=n)
    event = np.zeros(n, dtype=int)
    event[rng.choice(n, n_events, replace=False)] = 1
    return make_batch(time, event)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
