"""Small dense kernels: SVD of the projected matrix and shifted normal solves.

These operate on the (ell+1) x ell factors produced by the decompositions,
so everything here is tiny compared to the outer problem.  The SVD is
LAPACK's; the shifted normal equations ``(B* B + alpha I) z = b`` go through
a banded Cholesky factorization when ``B`` is lower bidiagonal (``B* B`` is
then tridiagonal) and a dense one otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cho_solve_banded, cholesky_banded


@dataclass(frozen=True)
class SmallSVD:
    """Factorization ``M = W diag(sigmas) S*`` with square orthogonal factors.

    ``rank`` counts the singular values above ``rank_tol * sigmas[0]``.
    """

    W: np.ndarray
    S: np.ndarray
    sigmas: np.ndarray
    rank: int


def svd_small(m, rank_tol: float = 1e-12) -> SmallSVD:
    """Full SVD of a small dense matrix with a relative rank cutoff."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if not 0.0 < rank_tol < 1.0:
        raise ValueError(f"rank_tol must be in (0, 1), got {rank_tol}")
    w, sigmas, st = np.linalg.svd(m, full_matrices=True)
    if sigmas.size and sigmas[0] > 0.0:
        rank = int(np.sum(sigmas > rank_tol * sigmas[0]))
    else:
        rank = 0
    return SmallSVD(W=w, S=st.T, sigmas=sigmas, rank=rank)


def _is_lower_bidiagonal(b: np.ndarray) -> bool:
    m, k = b.shape
    if m not in (k, k + 1):
        return False
    mask = np.ones_like(b, dtype=bool)
    idx = np.arange(k)
    mask[idx, idx] = False
    mask[idx[idx + 1 < m] + 1, idx[idx + 1 < m]] = False
    return not np.any(b[mask])


class ShiftedNormalSolver:
    """Factor ``B* B + alpha I`` once and solve against many right-hand sides.

    The factorization is reused across all steps of an iterated Tikhonov
    recurrence, which keeps the per-iteration cost at a pair of triangular
    solves.
    """

    def __init__(self, b, alpha: float):
        b = np.asarray(b, dtype=np.float64)
        if b.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {b.shape}")
        if alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.shape = b.shape
        m, k = b.shape
        self._banded = _is_lower_bidiagonal(b)
        if self._banded:
            # B*B is tridiagonal: assemble the upper banded form directly
            diag = np.array([b[j, j] ** 2 + (b[j + 1, j] ** 2 if j + 1 < m else 0.0) for j in range(k)])
            upper = np.zeros(k)
            upper[1:] = np.array([b[j, j - 1] * b[j, j] for j in range(1, k)])
            ab = np.vstack([upper, diag + alpha])
            self._factor = cholesky_banded(ab, lower=False)
        else:
            gram = b.T @ b + alpha * np.eye(k)
            self._factor = cho_factor(gram, lower=True)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.shape != (self.shape[1],):
            raise ValueError(
                f"right-hand side of length {self.shape[1]} expected, got shape {rhs.shape}"
            )
        if self._banded:
            return cho_solve_banded((self._factor, False), rhs)
        return cho_solve(self._factor, rhs)


def solve_shifted_normal(b, alpha: float, rhs) -> np.ndarray:
    """Solve ``(B* B + alpha I) z = rhs`` for a single right-hand side."""
    return ShiftedNormalSolver(b, alpha).solve(rhs)
