import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fmpp import Pattern, rect

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_pattern(rng, n=30, window=None, m=5, labels=None, scalars=False):
    window = window or rect(0, 1, 0, 1)
    x0, x1, y0, y1 = window.bbox
    xy = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    grid = np.linspace(0.0, 1.0, m)
    curves = rng.normal(size=(n, m)).cumsum(axis=1)
    return Pattern(
        window,
        xy,
        grid,
        curves,
        labels=None if labels is None else rng.integers(1, labels + 1, n),
        n_labels=labels,
        scalars=rng.uniform(size=n) if scalars else None,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit():
    return rect(0, 1, 0, 1)
