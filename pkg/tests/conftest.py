import numpy as np
import pytest

from geattr.data import LabelMap, PredictionMatrix


def make_matrix(values, labels=None, prefix="s"):
    values = np.asarray(values, dtype=float)
    j, k = values.shape
    seq = [f"{prefix}{i}" for i in range(j)]
    cats = [f"c{i}" for i in range(k)]
    p = PredictionMatrix(seq, cats, values)
    if labels is None:
        return p
    return p, LabelMap({s: cats[t] for s, t in zip(seq, labels)})


def random_case(rng: np.random.Generator, max_j=100, max_k=30):
    """Row-stochastic matrix with deliberate ties: quantized values, flat tails, full ties."""
    j = int(rng.integers(1, max_j + 1))
    k = int(rng.integers(2, max_k + 1))
    style = rng.integers(0, 3)
    if style == 0:
        raw = rng.random((j, k))
    elif style == 1:
        raw = rng.integers(0, 4, size=(j, k)).astype(float)
    else:
        raw = rng.dirichlet(np.ones(k) * 0.3, size=j)
        top = rng.integers(1, k + 1)
        raw[:, top:] = 0.0
    raw[raw.sum(axis=1) == 0] = 1.0
    for i in rng.choice(j, size=max(1, j // 10), replace=False):
        if rng.random() < 0.5:
            raw[i] = 1.0
    values = raw / raw.sum(axis=1, keepdims=True)
    labels = rng.integers(0, k, size=j)
    return make_matrix(values, labels)


def fuzz_corpus(n=200, seed=20201019):
    rng = np.random.default_rng(seed)
    return [random_case(rng) for _ in range(n)]


@pytest.fixture(scope="session")
def corpus():
    return fuzz_corpus()
