import numpy as np
import pytest

from branchquant.measures import DiscreteMeasure


def random_instance(seed, n_sinks, d=2, n_sources=1):
    """Seeded random balanced (sources, sinks) pair in the unit cube."""
    rng = np.random.default_rng(seed)
    sm = rng.uniform(0.2, 1.0, n_sources)
    sm = sm / sm.sum()
    src = DiscreteMeasure(rng.uniform(0, 1, (n_sources, d)), sm)
    m = rng.uniform(0.2, 1.0, n_sinks)
    m = m / m.sum()
    snk = DiscreteMeasure(rng.uniform(0, 1, (n_sinks, d)), m)
    return src, snk


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
