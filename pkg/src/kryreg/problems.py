"""Synthetic discrete ill-posed test problems and the noise model.

Generators build matrix-free operators together with an exact solution, and
noise is added with a prescribed relative level: the perturbation is scaled
so that ``||y_delta - y|| = xi * ||y||`` holds exactly, which makes the
noise bound ``delta`` known by construction.  All randomness flows through
:mod:`kryreg.rng`, so problems are reproducible bit-for-bit from
``(generator, parameters, seed)``.

Available generators:

* ``blur1d``   - Gaussian convolution on a 1-d signal (zero or reflexive
  boundary); symmetric, severely ill-conditioned.
* ``blur2d``   - separable Gaussian blur on an n x n image, applied as a
  row blur followed by a column blur (never materialized densely).
* ``motion2d`` - anisotropic blur with a one-sided horizontal smear and a
  Gaussian vertical component; square but far from symmetric, the regime
  where adjoint-free reductions are known to struggle.
* ``tomo``     - parallel-beam tomography with exact pixel/ray intersection
  lengths (Siddon traversal); rectangular, so only the Golub-Kahan path
  applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .decomp import Decomposition, estimate_h_ell
from .dense import svd_small
from .operators import LinearOperator, spectral_norm_estimate
from .rng import RandomStream, derive_seed


@dataclass(frozen=True)
class TestProblem:
    """Operator, exact solution and noisy data of one synthetic instance."""

    op: LinearOperator
    x_dagger: np.ndarray
    y_clean: np.ndarray
    y_delta: np.ndarray
    xi: float
    delta: float
    seed: int
    label: str
    image_shape: Optional[Tuple[int, int]] = None

    @property
    def x_dagger_norm(self) -> float:
        return float(np.linalg.norm(self.x_dagger))


@dataclass(frozen=True)
class SourceCondition:
    """Smoothness certificate ``x = (T* T)**nu w`` with ``||w|| = rho``."""

    nu: float
    w: np.ndarray
    rho: float


@dataclass(frozen=True)
class DiagnosticReport:
    """Subspace-quality numbers for one decomposition dimension."""

    ell: int
    assumption_gap: float
    gamma_ell: float
    h_ell_rel: float


def add_noise(y, xi: float, seed: int):
    """Perturb ``y`` to an exact relative noise level.

    Draws a standard-normal vector ``e`` from the documented stream and
    returns ``(y + (xi * ||y|| / ||e||) * e, xi * ||y||)``; with ``xi = 0``
    the data is returned unchanged with a zero bound.
    """
    y = np.asarray(y, dtype=np.float64)
    if xi < 0.0:
        raise ValueError(f"noise level must be nonnegative, got {xi}")
    if xi == 0.0:
        return y.copy(), 0.0
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        raise ValueError("cannot prescribe a relative noise level on zero data")
    e = RandomStream(seed).gaussian(y.size)
    enorm = float(np.linalg.norm(e))
    if enorm == 0.0:
        raise ValueError("degenerate noise draw")
    delta = xi * ynorm
    return y + (delta / enorm) * e, delta


# ---------------------------------------------------------------------------
# blur operators


def _gaussian_kernel(n: int, gamma: float) -> np.ndarray:
    radius = min(n - 1, max(1, int(math.ceil(8.0 * gamma))))
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(d**2) / (2.0 * gamma**2))
    return w / w.sum()


def gaussian_blur_1d(n: int, gamma: float, boundary: str = "reflexive") -> LinearOperator:
    """Normalized Gaussian convolution on a length-``n`` signal.

    The kernel is ``exp(-d**2 / (2 gamma**2))`` truncated at radius
    ``ceil(8 gamma)`` and normalized to sum one.  Under the reflexive
    boundary rule the signal is extended by whole-sample reflection, so
    constant inputs map to themselves; the zero rule pads with zeros.
    Application costs O(n * kernel width).
    """
    if n < 2:
        raise ValueError(f"signal length must be >= 2, got {n}")
    if gamma <= 0.0:
        raise ValueError(f"kernel width must be positive, got {gamma}")
    if boundary not in ("zero", "reflexive"):
        raise ValueError(f"unknown boundary rule {boundary!r}")
    w = _gaussian_kernel(n, gamma)
    r = (w.size - 1) // 2

    if boundary == "zero":
        # symmetric kernel + zero padding give a symmetric Toeplitz matrix
        def apply(x):
            return np.convolve(x, w, mode="same")

        adjoint = apply
    else:

        def apply(x):
            return np.convolve(np.pad(x, r, mode="symmetric"), w, mode="valid")

        def adjoint(u):
            z = np.convolve(u, w, mode="full")
            out = z[r : r + n].copy()
            out[:r] += z[:r][::-1]
            out[n - r :] += z[n + r :][::-1]
            return out

    return LinearOperator(
        n, n, apply, adjoint, label=f"blur1d(n={n}, gamma={gamma}, {boundary})"
    )


def _dense_1d_factor(op1d: LinearOperator) -> np.ndarray:
    return op1d.to_dense()


def _separable_operator(a: np.ndarray, b: np.ndarray, label: str) -> LinearOperator:
    """Operator acting on row-major flattened images as ``A X B^T``."""
    n = a.shape[0]

    def apply(x):
        return (a @ x.reshape(n, n) @ b.T).ravel()

    def adjoint(u):
        return (a.T @ u.reshape(n, n) @ b).ravel()

    return LinearOperator(n * n, n * n, apply, adjoint, label=label)


def gaussian_blur_2d(n: int, gamma: float) -> LinearOperator:
    """Separable Gaussian blur of an ``n x n`` image (reflexive boundary).

    Acts on row-major flattened images; rows and columns are blurred with
    the 1-d operator of :func:`gaussian_blur_1d`, so the full matrix (the
    Kronecker square of the 1-d factor) is never formed.
    """
    t1 = _dense_1d_factor(gaussian_blur_1d(n, gamma, boundary="reflexive"))
    return _separable_operator(t1, t1, label=f"blur2d(n={n}, gamma={gamma})")


def motion_blur_2d(n: int, length: int = 8, gamma: float = 1.0) -> LinearOperator:
    """Nonsymmetric blur: one-sided horizontal smear, Gaussian vertical blur.

    The horizontal factor smears each pixel over the ``length`` following
    pixels with exponentially decaying weights (zero boundary), which makes
    the operator strongly nonsymmetric.
    """
    if length < 1:
        raise ValueError(f"smear length must be >= 1, got {length}")
    taps = np.exp(-np.arange(length + 1, dtype=np.float64) / max(length / 3.0, 1.0))
    taps /= taps.sum()
    tm = np.zeros((n, n))
    for d, weight in enumerate(taps):
        tm += weight * np.eye(n, k=-d)
    tg = _dense_1d_factor(gaussian_blur_1d(n, gamma, boundary="reflexive"))
    return _separable_operator(
        tg, tm, label=f"motion2d(n={n}, length={length}, gamma={gamma})"
    )


# ---------------------------------------------------------------------------
# tomography


def tomography_parallel(
    n: int, n_angles: int, rays_per_angle: Optional[int] = None
) -> LinearOperator:
    """Parallel-beam tomography matrix on the unit-square pixel grid.

    Row ``(k, j)`` holds the exact intersection lengths of ray ``j`` at
    angle ``k`` with every pixel of the ``n x n`` grid (Siddon-style
    traversal).  Angles are uniform in ``[0, pi)``; the ``rays_per_angle``
    offsets (default ``floor(n * sqrt(2))``) are cell-centered across the
    square's diagonal.  The matrix is rectangular, so only adjoint-capable
    reductions apply.
    """
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    if n_angles < 1:
        raise ValueError(f"need at least one angle, got {n_angles}")
    if rays_per_angle is None:
        rays_per_angle = int(math.floor(n * math.sqrt(2.0)))
    if rays_per_angle < 1:
        raise ValueError(f"need at least one ray per angle, got {rays_per_angle}")

    half_diag = math.sqrt(2.0) / 2.0
    grid = np.linspace(0.0, 1.0, n + 1)
    rows, cols, vals = [], [], []
    row = 0
    for k in range(n_angles):
        theta = math.pi * k / n_angles
        dx, dy = math.cos(theta), math.sin(theta)
        for j in range(rays_per_angle):
            offset = ((j + 0.5) / rays_per_angle * 2.0 - 1.0) * half_diag
            px = 0.5 - offset * dy
            py = 0.5 + offset * dx
            t_lo, t_hi = -2.0, 2.0
            ok = True
            for p, d in ((px, dx), (py, dy)):
                if abs(d) > 1e-14:
                    t0, t1 = (0.0 - p) / d, (1.0 - p) / d
                    t_lo = max(t_lo, min(t0, t1))
                    t_hi = min(t_hi, max(t0, t1))
                elif not 0.0 <= p <= 1.0:
                    ok = False
            if not ok or t_hi <= t_lo:
                row += 1
                continue
            ts = [t_lo, t_hi]
            for p, d in ((px, dx), (py, dy)):
                if abs(d) > 1e-14:
                    tg = (grid - p) / d
                    ts.extend(tg[(tg > t_lo) & (tg < t_hi)])
            ts = np.unique(np.asarray(ts))
            lengths = np.diff(ts)
            mids = 0.5 * (ts[:-1] + ts[1:])
            ix = np.clip(np.floor((px + mids * dx) * n).astype(int), 0, n - 1)
            iy = np.clip(np.floor((py + mids * dy) * n).astype(int), 0, n - 1)
            keep = lengths > 0.0
            rows.extend([row] * int(np.sum(keep)))
            cols.extend((iy[keep] * n + ix[keep]).tolist())
            vals.extend(lengths[keep].tolist())
            row += 1

    n_rows = n_angles * rays_per_angle
    a = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n * n)).tocsr()
    at = a.T.tocsr()
    return LinearOperator(
        n_rows,
        n * n,
        lambda v: a @ v,
        lambda u: at @ u,
        label=f"tomo(n={n}, angles={n_angles}, rays={rays_per_angle})",
    )


# ---------------------------------------------------------------------------
# exact solutions


def phantom_1d(n: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    return (
        2.0 * np.exp(-30.0 * (t - 0.3) ** 2)
        + np.exp(-50.0 * (t - 0.75) ** 2)
        + 0.3 * t
    )


def phantom_2d(n: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    u, v = np.meshgrid(t, t, indexing="ij")
    img = 0.1 + np.exp(-((u - 0.35) ** 2 + (v - 0.4) ** 2) / 0.02)
    img += 0.7 * np.exp(-((u - 0.7) ** 2 + (v - 0.65) ** 2) / 0.008)
    img += 0.5 * ((u > 0.55) & (u < 0.8) & (v > 0.15) & (v < 0.35))
    return img


def phantom_disks(n: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    u, v = np.meshgrid(t, t, indexing="ij")
    img = np.zeros((n, n))
    for cy, cx, radius, value in (
        (0.5, 0.5, 0.40, 1.0),
        (0.42, 0.45, 0.15, -0.5),
        (0.63, 0.62, 0.08, 0.8),
    ):
        img += value * (((u - cy) ** 2 + (v - cx) ** 2) <= radius**2)
    return img


def make_source_solution(
    op: LinearOperator, nu: float, seed: int, rho: float = 1.0
):
    """Draw an exact solution satisfying ``x = (T* T)**nu w`` with ``||w|| = rho``.

    ``w`` is a seeded Gaussian vector projected onto the orthogonal
    complement of the kernel and rescaled; fractional powers are applied
    through the dense SVD, so this is restricted to problems with an
    affordable dense realization.
    """
    if nu < 0.0:
        raise ValueError(f"smoothness order must be nonnegative, got {nu}")
    if rho <= 0.0:
        raise ValueError(f"source norm must be positive, got {rho}")
    dense = op.to_dense()
    _, sigmas, vt = np.linalg.svd(dense, full_matrices=False)
    mask = sigmas > 1e-12 * (sigmas[0] if sigmas.size else 0.0)
    vr = vt[mask].T
    w = RandomStream(seed).gaussian(op.n_cols)
    w = vr @ (vr.T @ w)
    wnorm = float(np.linalg.norm(w))
    if wnorm == 0.0:
        raise ValueError("seed produced a vector in the kernel; use another seed")
    w *= rho / wnorm
    if nu == 0.0:
        x = w.copy()
    else:
        x = vr @ (sigmas[mask] ** (2.0 * nu) * (vr.T @ w))
    return SourceCondition(nu=nu, w=w, rho=rho), x


# ---------------------------------------------------------------------------
# problem assembly


def _problem(op, x_dagger, xi, seed, label, image_shape=None) -> TestProblem:
    y_clean = op.apply(x_dagger)
    y_delta, delta = add_noise(y_clean, xi, derive_seed(seed, "noise"))
    return TestProblem(
        op=op,
        x_dagger=x_dagger,
        y_clean=y_clean,
        y_delta=y_delta,
        xi=xi,
        delta=delta,
        seed=seed,
        label=label,
        image_shape=image_shape,
    )


def build_problem(name: str, n: int, xi: float, seed: int, **params) -> TestProblem:
    """Assemble a named test problem with exact solution and noisy data.

    Generator-specific keyword parameters: ``gamma`` and ``boundary`` for
    ``blur1d``; ``gamma`` for ``blur2d``; ``length`` and ``gamma`` for
    ``motion2d``; ``n_angles`` and ``rays_per_angle`` for ``tomo``.  A
    ``nu``/``rho`` pair replaces the phantom by a source-condition solution
    drawn from the seed (used by convergence-rate studies).
    """
    params = dict(params)
    nu = params.pop("nu", None)
    rho = params.pop("rho", 1.0)
    if name == "blur1d":
        op = gaussian_blur_1d(
            n, params.pop("gamma", 2.0), boundary=params.pop("boundary", "reflexive")
        )
        x_dagger, shape = phantom_1d(n), None
    elif name == "blur2d":
        op = gaussian_blur_2d(n, params.pop("gamma", 2.0))
        x_dagger, shape = phantom_2d(n).ravel(), (n, n)
    elif name == "motion2d":
        op = motion_blur_2d(
            n, length=int(params.pop("length", 8)), gamma=params.pop("gamma", 1.0)
        )
        x_dagger, shape = phantom_2d(n).ravel(), (n, n)
    elif name == "tomo":
        rays = params.pop("rays_per_angle", None)
        op = tomography_parallel(
            n,
            n_angles=int(params.pop("n_angles", 12)),
            rays_per_angle=None if rays is None else int(rays),
        )
        x_dagger, shape = phantom_disks(n).ravel(), (n, n)
    else:
        raise ValueError(f"unknown problem generator {name!r}")
    if params:
        raise ValueError(f"unused parameters for {name!r}: {sorted(params)}")
    if nu is not None:
        _, x_dagger = make_source_solution(op, nu, derive_seed(seed, "source"), rho=rho)
    return _problem(op, x_dagger, xi, seed, label=op.label, image_shape=shape)


PROBLEM_NAMES = ("blur1d", "blur2d", "motion2d", "tomo")


# ---------------------------------------------------------------------------
# subspace diagnostics


def _range_projector(decomp: Decomposition, rank_tol: float):
    svd = svd_small(decomp.matrix, rank_tol=rank_tol)
    wq = svd.W[:, : svd.rank]
    left = decomp.left

    def project(u):
        return left @ (wq @ (wq.T @ (left.T @ u)))

    return project


def assumption_diagnostics(
    op: LinearOperator,
    decomp: Decomposition,
    x_dagger,
    max_iters: int = 200,
    rel_tol: float = 1e-10,
    seed: int = 0,
    rank_tol: float = 1e-12,
    op_norm: Optional[float] = None,
) -> DiagnosticReport:
    """Measure how well a subspace supports the chosen parameter rules.

    ``assumption_gap`` is the relative norm of the commutator-style defect
    ``R_ell T (I - V V*) x_dagger`` against ``R_ell T x_dagger`` (zero when
    the subspace captures the exact solution); ``gamma_ell`` estimates the
    norm of ``(I - R_ell) T``; ``h_ell_rel`` is the approximation bound
    normalized by the operator norm.  None of these need be monotone in the
    subspace dimension; they are reported raw.
    """
    x_dagger = np.asarray(x_dagger, dtype=np.float64)
    project = _range_projector(decomp, rank_tol)
    v = decomp.right

    tx = op.apply(x_dagger)
    defect = op.apply(x_dagger - v @ (v.T @ x_dagger))
    den = float(np.linalg.norm(project(tx)))
    num = float(np.linalg.norm(project(defect)))
    gap = num / den if den > 0.0 else 0.0

    def resid(vec):
        out = op.apply(vec)
        return out - project(out)

    def resid_adj(vec):
        return op.apply_adjoint(vec - project(vec))

    u = RandomStream(derive_seed(seed, "gamma-power")).gaussian(op.n_cols)
    nu_ = np.linalg.norm(u)
    u = u / nu_ if nu_ > 0 else u
    gamma = 0.0
    prev = 0.0
    for _ in range(max_iters):
        w = resid(u)
        gamma = float(np.linalg.norm(w))
        if gamma == 0.0:
            break
        u = resid_adj(w)
        nu_ = np.linalg.norm(u)
        if nu_ == 0.0:
            break
        u /= nu_
        if abs(gamma - prev) <= rel_tol * gamma:
            break
        prev = gamma

    if op_norm is None:
        op_norm = spectral_norm_estimate(
            op, max_iters=max_iters, rel_tol=rel_tol, seed=derive_seed(seed, "op-norm")
        )
    h_ell = estimate_h_ell(
        op, decomp, max_iters=max_iters, rel_tol=rel_tol, seed=derive_seed(seed, "h-power")
    )
    return DiagnosticReport(
        ell=decomp.ell_eff,
        assumption_gap=gap,
        gamma_ell=gamma,
        h_ell_rel=h_ell / op_norm if op_norm > 0.0 else 0.0,
    )
