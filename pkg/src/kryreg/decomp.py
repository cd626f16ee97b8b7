"""Partial Golub-Kahan bidiagonalization and the Arnoldi process.

Both factorizations are seeded by the (noisy) data vector and stop either
after the requested number of steps or at breakdown of the recurrence.
``estimate_h_ell`` bounds the spectral-norm distance between the operator
and its rank-``ell`` Krylov approximation; that bound feeds the
regularization-parameter equations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .operators import LinearOperator, NonSquareOperatorError
from .rng import RandomStream


@dataclass(frozen=True)
class Breakdown:
    """Step index and value of the recurrence coefficient that vanished."""

    step: int
    coefficient: str  # "alpha" / "beta" for Golub-Kahan, "subdiag" for Arnoldi
    value: float


@dataclass(frozen=True)
class BidiagDecomposition:
    """Factors ``T V = U B`` and ``T* U_ell = V B_ell*`` of a partial run.

    ``U`` has ``ell_eff + 1`` columns and ``B`` is (ell_eff+1) x ell_eff
    lower bidiagonal in the regular case.  When the forward coefficient
    ``beta_{ell+1}`` vanishes (the subspace became invariant) the last
    column of ``U`` cannot be formed; the factors are then square:
    ``U`` has ``ell_eff`` columns and ``B`` is ell_eff x ell_eff.  The
    vanished coefficient is reported in ``breakdown``.
    """

    U: np.ndarray
    V: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    ell_requested: int
    breakdown: Optional[Breakdown] = None

    @property
    def ell_eff(self) -> int:
        return self.alphas.size

    @property
    def left(self) -> np.ndarray:
        return self.U

    @property
    def right(self) -> np.ndarray:
        return self.V

    @property
    def matrix(self) -> np.ndarray:
        """The bidiagonal factor as a dense (len(betas) x ell_eff) array."""
        m, k = self.betas.size, self.alphas.size
        b = np.zeros((m, k))
        for j in range(k):
            b[j, j] = self.alphas[j]
            if j + 1 < m:
                b[j + 1, j] = self.betas[j + 1]
        return b

    def prefix(self, ell: int) -> "BidiagDecomposition":
        """The decomposition the same run would have produced at step ``ell``."""
        if ell < 1 or ell > self.ell_eff:
            raise ValueError(f"prefix dimension {ell} not in [1, {self.ell_eff}]")
        if ell == self.ell_eff:
            return self
        return BidiagDecomposition(
            U=self.U[:, : ell + 1],
            V=self.V[:, :ell],
            alphas=self.alphas[:ell],
            betas=self.betas[: ell + 1],
            ell_requested=ell,
        )


@dataclass(frozen=True)
class ArnoldiDecomposition:
    """Factor ``T V_ell = V H`` with upper Hessenberg ``H``.

    ``V`` has ``ell_eff + 1`` columns and ``H`` is (ell_eff+1) x ell_eff in
    the regular case; on lucky breakdown (invariant subspace) the factors
    are square, as for :class:`BidiagDecomposition`.
    """

    V: np.ndarray
    H: np.ndarray
    ell_requested: int
    breakdown: Optional[Breakdown] = None

    @property
    def ell_eff(self) -> int:
        return self.H.shape[1]

    @property
    def left(self) -> np.ndarray:
        return self.V[:, : self.H.shape[0]]

    @property
    def right(self) -> np.ndarray:
        return self.V[:, : self.ell_eff]

    @property
    def matrix(self) -> np.ndarray:
        return self.H

    def prefix(self, ell: int) -> "ArnoldiDecomposition":
        if ell < 1 or ell > self.ell_eff:
            raise ValueError(f"prefix dimension {ell} not in [1, {self.ell_eff}]")
        if ell == self.ell_eff:
            return self
        return ArnoldiDecomposition(
            V=self.V[:, : ell + 1],
            H=self.H[: ell + 1, :ell],
            ell_requested=ell,
        )


Decomposition = Union[BidiagDecomposition, ArnoldiDecomposition]


def _reorthogonalize(w: np.ndarray, basis: np.ndarray, ncols: int) -> np.ndarray:
    # two classical Gram-Schmidt passes give near-machine orthogonality
    if ncols == 0:
        return w
    b = basis[:, :ncols]
    for _ in range(2):
        w = w - b @ (b.T @ w)
    return w


def golub_kahan_bidiagonalize(
    op: LinearOperator,
    y_delta,
    ell: int,
    reorthogonalize: bool = True,
    breakdown_tol: float = 1e-12,
    norm_estimate: Optional[float] = None,
) -> BidiagDecomposition:
    """Run ``ell`` steps of Golub-Kahan bidiagonalization seeded by ``y_delta``.

    The recurrence alternates adjoint and forward products:

    * ``w = T* u_i - beta_i v_{i-1}``, ``alpha_i = ||w||``, ``v_i = w / alpha_i``
    * ``w = T v_i - alpha_i u_i``, ``beta_{i+1} = ||w||``, ``u_{i+1} = w / beta_{i+1}``

    starting from ``beta_1 = ||y_delta||``, ``u_1 = y_delta / beta_1``.  With
    ``reorthogonalize`` (the default) each new vector is reorthogonalized
    against all previously generated columns.  A coefficient below
    ``breakdown_tol`` times a spectral-norm estimate of ``op`` truncates the
    run at the last completed step; pass ``norm_estimate`` to control that
    scale, otherwise the running maximum of the recurrence coefficients is
    used.

    Parameters
    ----------
    op : LinearOperator
    y_delta : array
        Nonzero data vector of length ``op.n_rows``.
    ell : int
        Number of steps, ``1 <= ell <= min(op.shape)``.
    """
    y_delta = np.asarray(y_delta, dtype=np.float64)
    if not 1 <= ell <= min(op.n_rows, op.n_cols):
        raise ValueError(
            f"ell={ell} out of range [1, {min(op.n_rows, op.n_cols)}] for {op.label}"
        )
    beta1 = float(np.linalg.norm(y_delta))
    if beta1 == 0.0:
        raise ValueError("initial vector y_delta must be nonzero")

    U = np.empty((op.n_rows, ell + 1))
    V = np.empty((op.n_cols, ell))
    alphas = np.empty(ell)
    betas = np.empty(ell + 1)
    betas[0] = beta1
    U[:, 0] = y_delta / beta1
    scale = 0.0 if norm_estimate is None else float(norm_estimate)
    breakdown = None
    n_alpha = 0
    n_u = 1

    for i in range(ell):
        w = op.apply_adjoint(U[:, i])
        if i > 0:
            w = w - betas[i] * V[:, i - 1]
        if reorthogonalize:
            w = _reorthogonalize(w, V, i)
        alpha = float(np.linalg.norm(w))
        if norm_estimate is None:
            scale = max(scale, alpha)
        if alpha <= breakdown_tol * scale or alpha == 0.0:
            breakdown = Breakdown(step=i + 1, coefficient="alpha", value=alpha)
            break
        alphas[i] = alpha
        V[:, i] = w / alpha
        n_alpha = i + 1

        w = op.apply(V[:, i]) - alpha * U[:, i]
        if reorthogonalize:
            w = _reorthogonalize(w, U, i + 1)
        beta = float(np.linalg.norm(w))
        if norm_estimate is None:
            scale = max(scale, beta)
        if beta <= breakdown_tol * scale or beta == 0.0:
            breakdown = Breakdown(step=i + 1, coefficient="beta", value=beta)
            break
        betas[i + 1] = beta
        U[:, i + 1] = w / beta
        n_u = i + 2

    return BidiagDecomposition(
        U=np.ascontiguousarray(U[:, :n_u]),
        V=np.ascontiguousarray(V[:, :n_alpha]),
        alphas=alphas[:n_alpha].copy(),
        betas=betas[:n_u].copy(),
        ell_requested=ell,
        breakdown=breakdown,
    )


def arnoldi_decompose(
    op: LinearOperator,
    y_delta,
    ell: int,
    reorthogonalize: bool = True,
    breakdown_tol: float = 1e-12,
    norm_estimate: Optional[float] = None,
) -> ArnoldiDecomposition:
    """Run ``ell`` steps of the Arnoldi process (modified Gram-Schmidt).

    Requires a square operator; only forward products are used.  Breakdown
    handling and reorthogonalization match
    :func:`golub_kahan_bidiagonalize` (the optional second pass folds its
    corrections into ``H``).
    """
    if not op.is_square:
        raise NonSquareOperatorError(
            f"the Arnoldi process needs a square operator, got {op.n_rows}x{op.n_cols} "
            f"({op.label}); only the Golub-Kahan path applies"
        )
    y_delta = np.asarray(y_delta, dtype=np.float64)
    if not 1 <= ell <= op.n_rows:
        raise ValueError(f"ell={ell} out of range [1, {op.n_rows}] for {op.label}")
    beta1 = float(np.linalg.norm(y_delta))
    if beta1 == 0.0:
        raise ValueError("initial vector y_delta must be nonzero")

    n = op.n_rows
    V = np.empty((n, ell + 1))
    H = np.zeros((ell + 1, ell))
    V[:, 0] = y_delta / beta1
    scale = 0.0 if norm_estimate is None else float(norm_estimate)
    breakdown = None
    n_cols = 0
    n_v = 1

    for k in range(ell):
        w = op.apply(V[:, k])
        for j in range(k + 1):
            h = float(V[:, j] @ w)
            H[j, k] = h
            w = w - h * V[:, j]
        if reorthogonalize:
            for j in range(k + 1):
                c = float(V[:, j] @ w)
                H[j, k] += c
                w = w - c * V[:, j]
        if norm_estimate is None:
            scale = max(scale, float(np.max(np.abs(H[: k + 1, k]))))
        hsub = float(np.linalg.norm(w))
        if norm_estimate is None:
            scale = max(scale, hsub)
        n_cols = k + 1
        if hsub <= breakdown_tol * scale or hsub == 0.0:
            breakdown = Breakdown(step=k + 1, coefficient="subdiag", value=hsub)
            break
        H[k + 1, k] = hsub
        V[:, k + 1] = w / hsub
        n_v = k + 2

    return ArnoldiDecomposition(
        V=np.ascontiguousarray(V[:, :n_v]),
        H=H[:n_v, :n_cols].copy(),
        ell_requested=ell,
        breakdown=breakdown,
    )


def estimate_h_ell(
    op: LinearOperator,
    decomp: Decomposition,
    max_iters: int = 200,
    rel_tol: float = 1e-10,
    seed: int = 0,
    safety: float = 1.01,
) -> float:
    """Upper bound on the norm of the residual ``T - L B R*`` of a decomposition.

    Runs power iteration on the residual operator
    ``v -> T v - L (B (R* v))`` (and its adjoint), then inflates the
    converged estimate by ``safety`` so the result can serve as the bound
    used on the right-hand side of the parameter equations.
    """
    left, right, mat = decomp.left, decomp.right, decomp.matrix

    def resid(v):
        return op.apply(v) - left @ (mat @ (right.T @ v))

    def resid_adj(u):
        return op.apply_adjoint(u) - right @ (mat.T @ (left.T @ u))

    v = RandomStream(seed).gaussian(op.n_cols)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v[0] = 1.0
        nv = 1.0
    v /= nv
    sigma_prev = 0.0
    sigma = 0.0
    for _ in range(max_iters):
        u = resid(v)
        sigma = float(np.linalg.norm(u))
        if sigma == 0.0:
            return 0.0
        v = resid_adj(u)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            break
        v /= nv
        if abs(sigma - sigma_prev) <= rel_tol * sigma:
            break
        sigma_prev = sigma
    return safety * sigma
