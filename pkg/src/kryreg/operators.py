"""Matrix-free linear operators with explicit adjoints.

All solvers in this package touch the forward map only through
:class:`LinearOperator`, i.e. through matrix-vector products with the
operator and its adjoint.  Dense matrices are wrapped with
:func:`LinearOperator.from_matrix`; large structured operators (blur,
tomography) supply their own apply/adjoint callables.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .rng import RandomStream


class NonSquareOperatorError(ValueError):
    """Raised when a square-only method is applied to a rectangular operator."""


def _as_vector(v, size: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != size:
        raise ValueError(
            f"{what}: expected a vector of length {size}, got shape {v.shape}"
        )
    return v


class LinearOperator:
    """Real linear map given by apply/adjoint-apply callables.

    Parameters
    ----------
    n_rows, n_cols : int
        Dimensions of the map (codomain and domain).
    apply : callable
        Maps a length-``n_cols`` vector to a length-``n_rows`` vector.
    apply_adjoint : callable
        Maps a length-``n_rows`` vector to a length-``n_cols`` vector.
    label : str
        Identifier used in error messages and exports.
    dense : ndarray, optional
        Explicit matrix realization, kept when the operator was built from
        one; ``to_dense`` falls back to basis probing otherwise.

    Instances are immutable and safe to share; both callables must be
    deterministic (identical input gives bit-identical output).
    """

    def __init__(
        self,
        n_rows: int,
        n_cols: int,
        apply: Callable[[np.ndarray], np.ndarray],
        apply_adjoint: Callable[[np.ndarray], np.ndarray],
        label: str = "operator",
        dense: Optional[np.ndarray] = None,
    ):
        if n_rows < 1 or n_cols < 1:
            raise ValueError(f"operator dimensions must be positive, got {n_rows}x{n_cols}")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self._apply = apply
        self._apply_adjoint = apply_adjoint
        self.label = label
        self._dense = dense

    @property
    def shape(self) -> tuple:
        return (self.n_rows, self.n_cols)

    @property
    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    def apply(self, v) -> np.ndarray:
        """Evaluate ``T v``."""
        v = _as_vector(v, self.n_cols, f"{self.label}.apply")
        out = np.asarray(self._apply(v), dtype=np.float64)
        return out

    def apply_adjoint(self, u) -> np.ndarray:
        """Evaluate ``T* u``."""
        u = _as_vector(u, self.n_rows, f"{self.label}.apply_adjoint")
        return np.asarray(self._apply_adjoint(u), dtype=np.float64)

    @classmethod
    def from_matrix(cls, a, label: str = "dense") -> "LinearOperator":
        """Wrap a dense matrix; apply is the exact matrix-vector product."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {a.shape}")
        return cls(
            a.shape[0],
            a.shape[1],
            lambda v: a @ v,
            lambda u: a.T @ u,
            label=label,
            dense=a,
        )

    def to_dense(self) -> np.ndarray:
        """Explicit matrix realization.

        Returns the stored matrix when the operator was built from one;
        otherwise probes with all canonical basis vectors (``n_cols``
        applies), which is only meant for small problems and test oracles.
        """
        if self._dense is not None:
            return self._dense
        cols = np.empty((self.n_rows, self.n_cols))
        e = np.zeros(self.n_cols)
        for j in range(self.n_cols):
            e[j] = 1.0
            cols[:, j] = self.apply(e)
            e[j] = 0.0
        return cols


def spectral_norm_estimate(
    op: LinearOperator,
    max_iters: int = 200,
    rel_tol: float = 1e-10,
    seed: int = 0,
) -> float:
    """Estimate the spectral norm of ``op`` by power iteration on ``T* T``.

    The start vector is drawn from the library stream with the given seed,
    so the estimate is reproducible.  Iteration stops when two successive
    estimates agree to ``rel_tol`` relatively or after ``max_iters`` steps;
    the returned value never exceeds the true norm (it is monotone from
    below up to the convergence slack).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    v = RandomStream(seed).gaussian(op.n_cols)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v[0] = 1.0
        nv = 1.0
    v /= nv
    sigma_prev = 0.0
    sigma = 0.0
    for _ in range(max_iters):
        u = op.apply(v)
        sigma = float(np.linalg.norm(u))
        if sigma == 0.0:
            return 0.0
        v = op.apply_adjoint(u)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return sigma
        v /= nv
        if abs(sigma - sigma_prev) <= rel_tol * sigma:
            break
        sigma_prev = sigma
    return sigma
