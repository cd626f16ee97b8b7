import numpy as np
import pytest

from kryreg import (
    LinearOperator,
    NonSquareOperatorError,
    RandomStream,
    arnoldi_decompose,
    estimate_h_ell,
    golub_kahan_bidiagonalize,
    spectral_norm_estimate,
)
from kryreg.problems import gaussian_blur_1d, motion_blur_2d, tomography_parallel

from conftest import random_dense, random_operator


def check_bidiag_invariants(op, decomp, norm_scale):
    u, v, b = decomp.U, decomp.V, decomp.matrix
    assert np.max(np.abs(u.T @ u - np.eye(u.shape[1]))) <= 1e-12
    assert np.max(np.abs(v.T @ v - np.eye(v.shape[1]))) <= 1e-12
    t = op.to_dense()
    assert np.max(np.abs(t @ v - u @ b)) <= 1e-10 * norm_scale
    ell = decomp.ell_eff
    assert np.max(np.abs(t.T @ u[:, :ell] - v @ b[:ell, :].T)) <= 1e-10 * norm_scale
    assert np.all(decomp.alphas > 0)
    assert np.all(decomp.betas > 0)
    # only the two bands are populated
    mask = np.ones_like(b, dtype=bool)
    idx = np.arange(ell)
    mask[idx, idx] = False
    sub = idx[idx + 1 < b.shape[0]]
    mask[sub + 1, sub] = False
    assert not np.any(b[mask])


def test_identity_breakdown_example():
    op = LinearOperator.from_matrix(np.eye(2))
    d = golub_kahan_bidiagonalize(op, [0.6, 0.8], 2)
    assert d.ell_eff == 1
    assert d.alphas[0] == pytest.approx(1.0, abs=1e-15)
    assert d.breakdown is not None
    assert d.breakdown.step == 1 and d.breakdown.coefficient == "beta"
    assert d.breakdown.value == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(d.V[:, 0], [0.6, 0.8], atol=1e-15)


def test_hand_executed_recurrence_diag21():
    op = LinearOperator.from_matrix(np.diag([2.0, 1.0]))
    y = np.array([1.0, 1.0]) / np.sqrt(2.0)
    d = golub_kahan_bidiagonalize(op, y, 2)
    assert d.alphas[0] == pytest.approx(np.sqrt(2.5), rel=1e-14)
    assert d.betas[1] == pytest.approx(np.sqrt(0.9), rel=1e-14)
    assert np.allclose(d.V[:, 0], np.array([2.0, 1.0]) / np.sqrt(5.0), atol=1e-14)
    # brute-force oracle: orthonormalize the Krylov vectors directly
    t = np.diag([2.0, 1.0])
    k1 = t.T @ y
    v1 = k1 / np.linalg.norm(k1)
    assert np.allclose(d.V[:, 0], v1, atol=1e-14)


def test_first_column_and_beta1():
    op = random_operator(31, 9, 6)
    y = RandomStream(32).gaussian(9)
    d = golub_kahan_bidiagonalize(op, y, 4)
    assert d.betas[0] == pytest.approx(np.linalg.norm(y), rel=1e-15)
    assert np.allclose(d.U[:, 0], y / np.linalg.norm(y), atol=1e-15)


def test_full_ell_reconstruction():
    a = random_dense(8, 10, 7)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(9).gaussian(10)
    d = golub_kahan_bidiagonalize(op, y, 7)
    norm = np.linalg.norm(a, 2)
    assert np.max(np.abs(a - d.left @ d.matrix @ d.right.T)) <= 1e-10 * norm


def test_invariants_on_problem_grid():
    cases = [
        (LinearOperator.from_matrix(random_dense(1, 10, 7)), 55, [1, 3, 7]),
        (LinearOperator.from_matrix(random_dense(2, 7, 10)), 56, [2, 5, 7]),
        (gaussian_blur_1d(24, 1.5), 57, [1, 4, 10]),
        (motion_blur_2d(5, length=3, gamma=0.8), 58, [2, 6]),
        (tomography_parallel(4, 6, 5), 59, [2, 5, 8]),
    ]
    for op, seed, ells in cases:
        norm = spectral_norm_estimate(op, max_iters=300, rel_tol=1e-12, seed=seed)
        y = RandomStream(seed).gaussian(op.n_rows)
        for ell in ells:
            d = golub_kahan_bidiagonalize(op, y, ell)
            check_bidiag_invariants(op, d, norm)


def test_krylov_span_membership():
    a = random_dense(13, 9, 7)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(14).gaussian(9)
    ell = 5
    d = golub_kahan_bidiagonalize(op, y, ell)
    # brute-force Krylov bases
    kv = np.empty((7, ell))
    w = a.T @ y
    for k in range(ell):
        kv[:, k] = w
        w = a.T @ (a @ w)
    qv, _ = np.linalg.qr(kv)
    ku = np.empty((9, ell + 1))
    w = y
    for k in range(ell + 1):
        ku[:, k] = w
        w = a @ (a.T @ w)
    qu, _ = np.linalg.qr(ku)
    for k in range(ell):
        resid = d.V[:, k] - qv[:, : k + 1] @ (qv[:, : k + 1].T @ d.V[:, k])
        assert np.linalg.norm(resid) <= 1e-8
    for k in range(ell + 1):
        resid = d.U[:, k] - qu[:, : k + 1] @ (qu[:, : k + 1].T @ d.U[:, k])
        assert np.linalg.norm(resid) <= 1e-8


def test_reorthogonalization_on_off_agreement():
    a = random_dense(41, 50, 40)
    a += 3.0 * np.eye(50, 40)  # keep it well conditioned
    op = LinearOperator.from_matrix(a)
    y = RandomStream(42).gaussian(50)
    d_on = golub_kahan_bidiagonalize(op, y, 10, reorthogonalize=True)
    d_off = golub_kahan_bidiagonalize(op, y, 10, reorthogonalize=False)
    for k in range(10):
        diff = min(
            np.linalg.norm(d_on.V[:, k] - d_off.V[:, k]),
            np.linalg.norm(d_on.V[:, k] + d_off.V[:, k]),
        )
        assert diff <= 1e-8


def test_prefix_matches_fresh_run():
    op = random_operator(71, 12, 9)
    y = RandomStream(72).gaussian(12)
    full = golub_kahan_bidiagonalize(op, y, 8)
    fresh = golub_kahan_bidiagonalize(op, y, 5)
    pre = full.prefix(5)
    assert np.array_equal(pre.U, fresh.U)
    assert np.array_equal(pre.V, fresh.V)
    assert np.array_equal(pre.alphas, fresh.alphas)
    assert np.array_equal(pre.betas, fresh.betas)


def test_rejects_bad_inputs():
    op = random_operator(5, 6, 4)
    with pytest.raises(ValueError, match="nonzero"):
        golub_kahan_bidiagonalize(op, np.zeros(6), 2)
    with pytest.raises(ValueError, match="out of range"):
        golub_kahan_bidiagonalize(op, np.ones(6), 5)
    with pytest.raises(ValueError, match="out of range"):
        golub_kahan_bidiagonalize(op, np.ones(6), 0)


# ---------------------------------------------------------------------------
# Arnoldi


def test_arnoldi_identity_breakdown():
    op = LinearOperator.from_matrix(np.eye(3))
    y = np.array([1.0, 2.0, 2.0]) / 3.0
    d = arnoldi_decompose(op, y, 3)
    assert d.ell_eff == 1
    assert d.H.shape == (1, 1)
    assert d.H[0, 0] == pytest.approx(1.0, rel=1e-15)
    assert d.breakdown is not None and d.breakdown.step == 1


def test_arnoldi_symmetric_gives_tridiagonal():
    op = LinearOperator.from_matrix(np.diag([3.0, 2.0, 1.0]))
    y = np.array([1.0, 1.0, 1.0])
    d = arnoldi_decompose(op, y, 2)
    assert d.H[0, 1] == pytest.approx(d.H[1, 0], abs=1e-12)


def test_arnoldi_dense_projection_oracle():
    a = random_dense(81, 8, 8)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(82).gaussian(8)
    d = arnoldi_decompose(op, y, 4)
    h_oracle = d.V[:, :5].T @ a @ d.V[:, :4]
    assert np.max(np.abs(d.H - h_oracle)) <= 1e-10
    assert np.max(np.abs(d.V.T @ d.V - np.eye(5))) <= 1e-12
    # strictly zero below the first subdiagonal
    for j in range(4):
        assert not np.any(d.H[j + 2 :, j])
    assert np.all(np.diag(d.H, -1) > 0)


def test_arnoldi_rejects_rectangular():
    op = random_operator(91, 6, 4)
    with pytest.raises(NonSquareOperatorError):
        arnoldi_decompose(op, np.ones(6), 2)


def test_arnoldi_first_column():
    op = random_operator(95, 7, 7)
    y = RandomStream(96).gaussian(7)
    d = arnoldi_decompose(op, y, 3)
    assert np.allclose(d.V[:, 0], y / np.linalg.norm(y), atol=1e-15)


# ---------------------------------------------------------------------------
# h_ell


def test_h_ell_zero_at_full_dimension():
    a = random_dense(61, 9, 6)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(62).gaussian(9)
    d = golub_kahan_bidiagonalize(op, y, 6)
    h = estimate_h_ell(op, d, max_iters=50, rel_tol=1e-8, seed=63)
    assert h <= 1e-10 * np.linalg.norm(a, 2)


def test_h_ell_matches_dense_svd():
    a = random_dense(64, 30, 20)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(65).gaussian(30)
    d = golub_kahan_bidiagonalize(op, y, 5)
    h = estimate_h_ell(op, d, max_iters=3000, rel_tol=1e-13, seed=66)
    exact = np.linalg.norm(a - d.left @ d.matrix @ d.right.T, 2)
    assert h == pytest.approx(exact, rel=0.02)


def test_h_ell_diag21_at_ell1():
    t = np.diag([2.0, 1.0])
    op = LinearOperator.from_matrix(t)
    y = np.array([1.0, 1.0]) / np.sqrt(2.0)
    d = golub_kahan_bidiagonalize(op, y, 1)
    h = estimate_h_ell(op, d, max_iters=2000, rel_tol=1e-14, seed=5)
    exact = np.linalg.norm(t - d.left @ d.matrix @ d.right.T, 2)
    assert h == pytest.approx(exact, rel=0.02)


def test_h_ell_bounded_by_operator_norm():
    a = random_dense(67, 12, 10)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(68).gaussian(12)
    norm_est = spectral_norm_estimate(op, max_iters=500, rel_tol=1e-12)
    for ell in range(1, 11):
        d = golub_kahan_bidiagonalize(op, y, ell)
        h = estimate_h_ell(op, d, max_iters=300, rel_tol=1e-10)
        assert np.isfinite(h)
        assert h <= 1.02 * norm_est
    arn = arnoldi_decompose(
        LinearOperator.from_matrix(random_dense(69, 10, 10)),
        RandomStream(70).gaussian(10),
        4,
    )
    h = estimate_h_ell(LinearOperator.from_matrix(random_dense(69, 10, 10)), arn)
    assert np.isfinite(h)
