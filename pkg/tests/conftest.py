import numpy as np
import pytest

from apmetric.library import UNCONSTRAINED, load_metric


@pytest.fixture(scope="session")
def corpus():
    """Name -> parsed expression for every bundled metric."""
    from apmetric.library import corpus_names

    return {name: load_metric(name) for name in corpus_names()}


@pytest.fixture(scope="session")
def unconstrained_corpus(corpus):
    return {name: corpus[name] for name in UNCONSTRAINED}


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def random_binary(rng, n, ensure_positive=False):
    y = (rng.random(n) < 0.5).astype(float)
    if ensure_positive and y.sum() == 0:
        y[int(rng.integers(n))] = 1.0
    return y
