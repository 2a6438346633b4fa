import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("hlvkit", deadline=None, max_examples=100, derandomize=True)
settings.load_profile("hlvkit")


@st.composite
def judgement_pairs(draw, kind="multiclass", max_n=8, max_k=5, min_k=2):
    """Two same-shape judgement arrays (rows sum to 1 for multiclass)."""
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(min_k, max_k))
    cells = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)
    out = []
    for _ in range(2):
        a = draw(arrays(np.float64, (n, k), elements=cells))
        if kind == "multiclass":
            a = a + 1e-3
            a = a / a.sum(axis=1, keepdims=True)
        out.append(a)
    return out


def random_simplex(rng, n, k, alpha=1.0):
    g = rng.gamma(alpha, size=(n, k)) + 1e-300
    return g / g.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
