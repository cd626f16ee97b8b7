"""Choice of the regularization parameter.

The parameter is the unique positive root of the monotone equation

    phi(alpha) = sum_j  yhat_j**2 * (alpha / (sigma_j**2 + alpha))**(2 i + 1)
               = rhs,

where the ``sigma_j`` are the singular values of the projected factor,
``yhat`` is the data rotated into its left singular basis and restricted to
the numerical range (the orthogonal projector onto the range of the Krylov
approximation), and ``i`` is the iterated-Tikhonov iteration count.  Two
right-hand sides are supported:

* strategy ``a-known``:   rhs = (E h_ell + C delta)**2 with E a bound on the
  norm of the exact solution (``a-selfref`` replaces E by D times the norm
  of the current regularized solution, iterated to a fixed point);
* strategy ``b-tau``:     rhs = tau * delta**2, which needs no bound h_ell and
  is therefore usable on much smaller subspaces.

The equation has a unique root exactly when ``sqrt(rhs)`` is strictly
smaller than the norm of the projected data; otherwise the cell is reported
infeasible rather than falling back to a heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dense import SmallSVD

STRATEGY_VARIANTS = ("a-known", "a-selfref", "b-tau", "fixed")

_DEGENERATE_TOL = 1e-14
_ROOT_REL_TOL = 1e-10
_SELFREF_SWEEPS = 8
_SELFREF_REL_TOL = 1e-6


@dataclass(frozen=True)
class ParamStrategy:
    """Parameter-choice rule and its constants.

    ``variant`` is one of ``a-known`` (constants ``c`` and ``e``; ``e`` may
    be left ``None`` to use the known solution norm of the problem),
    ``a-selfref`` (constants ``c`` and ``d >= 1``), ``b-tau`` (constant
    ``tau >= 1``) or ``fixed`` (bypass the rule and use ``alpha`` as given).
    """

    variant: str
    c: float = 1.0
    e: Optional[float] = None
    d: float = 1.0
    tau: float = 1.0
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.variant not in STRATEGY_VARIANTS:
            raise ValueError(f"unknown strategy variant {self.variant!r}")
        if self.c <= 0.0:
            raise ValueError(f"constant c must be positive, got {self.c}")
        if self.d < 1.0:
            raise ValueError(f"constant d must be >= 1, got {self.d}")
        if self.tau < 1.0:
            raise ValueError(f"constant tau must be >= 1, got {self.tau}")
        if self.variant == "fixed" and (self.alpha is None or self.alpha <= 0.0):
            raise ValueError("fixed strategy needs a positive alpha")

    @property
    def needs_h_ell(self) -> bool:
        return self.variant in ("a-known", "a-selfref")

    def label(self) -> str:
        return self.variant


@dataclass(frozen=True)
class ProjectedData:
    """Projected data vector feeding the parameter equation.

    ``y_hat`` is the rotation of the reduced data into the left singular
    basis of the projected factor with the entries past the numerical rank
    zeroed; its norm equals the norm of the data projected onto the range
    of the Krylov approximation.  ``degenerate`` flags the case where all
    retained entries vanish, which voids the unique-root guarantee.
    """

    y_hat: np.ndarray
    sigmas: np.ndarray
    rank: int
    degenerate: bool

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.y_hat))


def project_data(svd: SmallSVD, y_reduced) -> ProjectedData:
    """Rotate reduced data into the singular basis and apply the range projector."""
    y_reduced = np.asarray(y_reduced, dtype=np.float64)
    if y_reduced.shape != (svd.W.shape[0],):
        raise ValueError(
            f"reduced data of length {svd.W.shape[0]} expected, got shape {y_reduced.shape}"
        )
    y_hat = svd.W.T @ y_reduced
    y_hat[svd.rank :] = 0.0
    ynorm = float(np.linalg.norm(y_reduced))
    degenerate = svd.rank == 0 or bool(
        np.all(np.abs(y_hat[: svd.rank]) < _DEGENERATE_TOL * ynorm)
    )
    return ProjectedData(
        y_hat=y_hat,
        sigmas=svd.sigmas,
        rank=svd.rank,
        degenerate=degenerate,
    )


def _log_ratios(alpha: float, data: ProjectedData) -> np.ndarray:
    # log(alpha / (sigma_j**2 + alpha)) evaluated stably for extreme alpha
    s2 = data.sigmas[: data.rank] ** 2
    return np.log1p(-s2 / (s2 + alpha))


def phi(alpha: float, data: ProjectedData, i: int) -> float:
    """Left-hand side of the parameter equation; strictly increasing in alpha."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if i < 1:
        raise ValueError(f"iteration count must be >= 1, got {i}")
    y2 = data.y_hat[: data.rank] ** 2
    return float(np.sum(y2 * np.exp((2 * i + 1) * _log_ratios(alpha, data))))


def phi_prime(alpha: float, data: ProjectedData, i: int) -> float:
    """Derivative of :func:`phi` with respect to alpha."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    s2 = data.sigmas[: data.rank] ** 2
    y2 = data.y_hat[: data.rank] ** 2
    ratios_pow = np.exp(2 * i * _log_ratios(alpha, data))
    return float((2 * i + 1) * np.sum(y2 * ratios_pow * s2 / (s2 + alpha) ** 2))


def compute_rhs(
    strategy: ParamStrategy,
    h_ell: float,
    delta: float,
    x_norm_estimate: float = 0.0,
) -> float:
    """Right-hand side of the parameter equation for the given strategy."""
    if h_ell < 0.0 or delta < 0.0 or x_norm_estimate < 0.0:
        raise ValueError("h_ell, delta and x_norm_estimate must be nonnegative")
    if strategy.variant == "a-known":
        e = strategy.e if strategy.e is not None else x_norm_estimate
        return (e * h_ell + strategy.c * delta) ** 2
    if strategy.variant == "a-selfref":
        return (strategy.d * x_norm_estimate * h_ell + strategy.c * delta) ** 2
    if strategy.variant == "b-tau":
        return strategy.tau * delta**2
    raise ValueError(f"no right-hand side for strategy {strategy.variant!r}")


def solve_alpha(data: ProjectedData, i: int, rhs: float) -> Optional[float]:
    """Unique positive root of ``phi(alpha) = rhs``, or ``None`` if infeasible.

    Infeasible means ``rhs`` is zero (the equation has no positive root),
    at least the squared norm of the projected data (the root would be at
    infinity), or the data is degenerate.  The root is located by bisection
    in ``log alpha`` and polished with safeguarded Newton steps to a
    relative tolerance of 1e-10.
    """
    if rhs < 0.0:
        raise ValueError(f"rhs must be nonnegative, got {rhs}")
    if data.degenerate or rhs == 0.0:
        return None
    sup = float(np.sum(data.y_hat[: data.rank] ** 2))
    if rhs >= sup:
        return None
    s1 = float(data.sigmas[0]) ** 2
    lo, hi = 1e-14 * s1, 1e6 * s1
    # widen until the root is strictly bracketed
    while phi(lo, data, i) >= rhs and lo > 1e-280:
        lo *= 1e-2
    while phi(hi, data, i) <= rhs and hi < 1e280:
        hi *= 1e2
    for _ in range(200):
        if hi - lo <= _ROOT_REL_TOL * lo:
            break
        mid = float(np.sqrt(lo * hi))
        if phi(mid, data, i) < rhs:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    for _ in range(8):
        f = phi(alpha, data, i) - rhs
        if abs(f) <= 1e-12 * rhs:
            break
        df = phi_prime(alpha, data, i)
        if df <= 0.0:
            break
        step = f / df
        candidate = alpha - step
        if not lo <= candidate <= hi:
            candidate = float(np.sqrt(lo * hi))
        if phi(candidate, data, i) < rhs:
            lo = candidate
        else:
            hi = candidate
        if abs(candidate - alpha) <= _ROOT_REL_TOL * alpha:
            alpha = candidate
            break
        alpha = candidate
    return float(alpha)


@dataclass(frozen=True)
class AlphaSelection:
    """Outcome of the parameter rule for one solve."""

    alpha: Optional[float]
    rhs: Optional[float]
    feasible: bool
    converged: bool = True


def select_alpha(
    strategy: ParamStrategy,
    data: ProjectedData,
    i: int,
    h_ell: float,
    delta: float,
    x_dagger_norm: Optional[float] = None,
    solution_norm: Optional[Callable[[float], float]] = None,
) -> AlphaSelection:
    """Apply a parameter strategy to projected data.

    ``x_dagger_norm`` supplies E for ``a-known`` when the strategy carries
    no explicit value.  ``solution_norm`` must map alpha to the norm of the
    corresponding regularized solution; it drives the ``a-selfref``
    fixed-point sweep (started from a zero norm estimate, at most
    8 sweeps, stopping at a relative alpha change of 1e-6).
    """
    if strategy.variant == "fixed":
        return AlphaSelection(alpha=float(strategy.alpha), rhs=None, feasible=True)
    if strategy.variant == "b-tau":
        rhs = compute_rhs(strategy, 0.0, delta)
        alpha = solve_alpha(data, i, rhs)
        return AlphaSelection(alpha=alpha, rhs=rhs, feasible=alpha is not None)
    if strategy.variant == "a-known":
        if strategy.e is None and x_dagger_norm is None:
            raise ValueError("strategy a-known needs e or a known solution norm")
        rhs = compute_rhs(strategy, h_ell, delta, x_norm_estimate=x_dagger_norm or 0.0)
        alpha = solve_alpha(data, i, rhs)
        return AlphaSelection(alpha=alpha, rhs=rhs, feasible=alpha is not None)
    # a-selfref: E depends on the solution, which depends on alpha
    if solution_norm is None:
        raise ValueError("strategy a-selfref needs a solution_norm callback")
    x_norm = 0.0
    alpha = None
    rhs = None
    for _ in range(_SELFREF_SWEEPS):
        rhs = compute_rhs(strategy, h_ell, delta, x_norm_estimate=x_norm)
        candidate = solve_alpha(data, i, rhs)
        if candidate is None:
            return AlphaSelection(alpha=None, rhs=rhs, feasible=False)
        if alpha is not None and abs(candidate - alpha) <= _SELFREF_REL_TOL * alpha:
            return AlphaSelection(alpha=candidate, rhs=rhs, feasible=True)
        alpha = candidate
        x_norm = float(solution_norm(alpha))
    return AlphaSelection(alpha=alpha, rhs=rhs, feasible=True, converged=False)
