import numpy as np
import pytest

from vsmm.decompose import SparseMatrixCOO


def random_sparse(rng: np.random.Generator, m: int, n: int,
                  t: int, integer: bool = False) -> SparseMatrixCOO:
    """Random COO matrix with exactly t distinct nonzero entries."""
    t = min(t, m * n)
    flat = rng.choice(m * n, size=t, replace=False)
    if integer:
        weights = rng.integers(-50, 50, size=t)
        weights[weights == 0] = 1
    else:
        weights = rng.uniform(0.1, 4.0, size=t) * rng.choice([-1.0, 1.0], size=t)
    entries = [(int(p) // n, int(p) % n, w) for p, w in zip(flat, weights)]
    return SparseMatrixCOO.from_entries(m, n, entries)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
