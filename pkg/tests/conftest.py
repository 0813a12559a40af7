import numpy as np
import pytest

from burstlab import EventDataset, EventSequence


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_dataset(rng, n=3, m=4, max_events=30, decay_scale=1.0, observed_frac=1.0):
    """Small random grid for likelihood/gradient tests."""
    sequences = {}
    for i in range(n):
        for j in range(m):
            if rng.uniform() > observed_frac:
                continue
            count = int(rng.integers(0, max_events + 1))
            times = np.sort(rng.uniform(0.0, 10.0 / decay_scale, size=count))
            times = np.unique(times)
            horizon = (times[-1] if times.size else 0.0) + rng.uniform(0.1, 2.0)
            sequences[(i, j)] = EventSequence(pair=(i, j), times=times, horizon=horizon)
    return EventDataset(n_assignments=n, n_students=m, sequences=sequences)
