import numpy as np
import pytest

from vaslab.env import GridDims, Task


def make_task(rows=3, cols=3, d=2, labels=None, rng=None, features=None):
    dims = GridDims(rows, cols)
    if rng is None:
        rng = np.random.default_rng(0)
    if labels is None:
        labels = rng.integers(0, 2, size=dims.n)
    labels = np.asarray(labels)
    if features is None:
        features = rng.standard_normal((dims.n, d))
    return Task(dims=dims, features=features, labels=labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
