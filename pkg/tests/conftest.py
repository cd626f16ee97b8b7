import numpy as np
import pytest

from kryreg import LinearOperator, RandomStream


def random_dense(seed: int, m: int, n: int) -> np.ndarray:
    return RandomStream(seed).gaussian(m * n).reshape(m, n)


def random_operator(seed: int, m: int, n: int) -> LinearOperator:
    return LinearOperator.from_matrix(random_dense(seed, m, n), label=f"rand{m}x{n}")


def random_lower_bidiagonal(seed: int, m: int, k: int) -> np.ndarray:
    """Random (m x k) lower bidiagonal with positive band entries."""
    stream = RandomStream(seed)
    b = np.zeros((m, k))
    diag = 0.5 + stream.uniform(k)
    sub = 0.5 + stream.uniform(k)
    for j in range(k):
        b[j, j] = diag[j]
        if j + 1 < m:
            b[j + 1, j] = sub[j]
    return b


@pytest.fixture
def rng():
    return RandomStream(2024)
