import numpy as np
import pytest

from kryreg import (
    LinearOperator,
    NonSquareOperatorError,
    ParamStrategy,
    RandomStream,
    RegularizationConfig,
    golub_kahan_bidiagonalize,
    iat_solve,
    igkt_solve,
    iterated_tikhonov_full,
    reduced_iterated_tikhonov,
    svd_small,
    tomography_parallel,
)
from kryreg.solvers import finish_subspace, prepare_subspace, solve_on_subspace

from conftest import random_dense, random_lower_bidiagonal, random_operator


def fixed(alpha: float) -> ParamStrategy:
    return ParamStrategy(variant="fixed", alpha=alpha)


def test_full_scalar_closed_form():
    x = iterated_tikhonov_full(np.array([[1.0]]), np.array([1.0]), 1.0, 2)
    assert x[0] == pytest.approx(0.75, rel=1e-15)


def test_full_i1_is_standard_tikhonov():
    t = random_dense(211, 6, 5)
    y = RandomStream(212).gaussian(6)
    alpha = 0.8
    x1 = iterated_tikhonov_full(t, y, alpha, 1)
    closed = np.linalg.solve(t.T @ t + alpha * np.eye(5), t.T @ y)
    assert np.allclose(x1, closed, rtol=1e-13)


def test_full_recurrence_equals_literal_sum():
    t = random_dense(213, 6, 6)
    y = RandomStream(214).gaussian(6)
    alpha, i = 0.5, 4
    x = iterated_tikhonov_full(t, y, alpha, i)
    inv = np.linalg.inv(t.T @ t + alpha * np.eye(6))
    literal = np.zeros(6)
    for k in range(1, i + 1):
        literal += alpha ** (k - 1) * np.linalg.matrix_power(inv, k) @ (t.T @ y)
    assert np.linalg.norm(x - literal) <= 1e-11 * np.linalg.norm(literal)


def test_reduced_scalar_case():
    z = reduced_iterated_tikhonov(
        np.array([[1.0], [0.0]]), np.array([1.0, 0.0]), 1.0, 2
    )
    assert z[0] == pytest.approx(0.75, rel=1e-15)


def test_reduced_i1_closed_form():
    b = random_lower_bidiagonal(221, 8, 7)
    y = RandomStream(222).gaussian(8)
    alpha = 0.9
    z = reduced_iterated_tikhonov(b, y, alpha, 1)
    closed = np.linalg.solve(b.T @ b + alpha * np.eye(7), b.T @ y)
    assert np.allclose(z, closed, rtol=1e-12)


def test_reduced_cholesky_path_equals_svd_filter_path():
    b = random_lower_bidiagonal(223, 8, 7)
    y = RandomStream(224).gaussian(8)
    alpha, i = 0.2, 5
    z = reduced_iterated_tikhonov(b, y, alpha, i)
    out = svd_small(b)
    coeff = out.W.T @ y
    ratios = alpha / (out.sigmas**2 + alpha)
    filt = (1.0 - ratios**i) / out.sigmas
    z_svd = out.S @ (filt * coeff[:7])
    assert np.linalg.norm(z - z_svd) <= 1e-11 * np.linalg.norm(z_svd)


def test_rejects_bad_alpha_and_iterations():
    with pytest.raises(ValueError):
        iterated_tikhonov_full(np.eye(2), np.ones(2), 0.0, 1)
    with pytest.raises(ValueError):
        iterated_tikhonov_full(np.eye(2), np.ones(2), 1.0, 0)
    with pytest.raises(ValueError):
        reduced_iterated_tikhonov(np.eye(2), np.ones(2), -1.0, 1)


def test_igkt_full_subspace_matches_dense_oracle():
    a = random_dense(231, 12, 9)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(232).gaussian(12)
    for alpha in (1e-3, 1.0, 10.0):
        for i in (1, 3, 10):
            cfg = RegularizationConfig(ell=9, iterations=i, strategy=fixed(alpha))
            report = igkt_solve(op, y, cfg, delta=0.0)
            oracle = iterated_tikhonov_full(a, y, alpha, i)
            err = np.linalg.norm(report.x - oracle) / np.linalg.norm(oracle)
            assert err <= 1e-9


def test_iat_full_subspace_matches_dense_oracle():
    a = random_dense(233, 7, 7)
    op = LinearOperator.from_matrix(a)
    y = RandomStream(234).gaussian(7)
    for i in (1, 3, 10):
        cfg = RegularizationConfig(ell=7, iterations=i, strategy=fixed(0.7))
        report = iat_solve(op, y, cfg, delta=0.0)
        oracle = iterated_tikhonov_full(a, y, 0.7, i)
        err = np.linalg.norm(report.x - oracle) / np.linalg.norm(oracle)
        assert err <= 1e-9


def test_igkt_i1_is_gkt_bit_for_bit():
    op = random_operator(235, 10, 8)
    y = RandomStream(236).gaussian(10)
    alpha = 0.4
    cfg = RegularizationConfig(ell=5, iterations=1, strategy=fixed(alpha))
    report = igkt_solve(op, y, cfg, delta=0.0)
    d = golub_kahan_bidiagonalize(op, y, 5)
    z = reduced_iterated_tikhonov(d.matrix, d.left.T @ y, alpha, 1)
    assert np.array_equal(report.x, d.right @ z)


def test_both_methods_match_their_reduced_definitions():
    a = random_dense(237, 8, 8)
    a = 0.5 * (a + a.T)  # symmetric instance
    op = LinearOperator.from_matrix(a)
    y = RandomStream(238).gaussian(8)
    alpha, ell, i = 0.3, 4, 3
    gk = igkt_solve(op, y, RegularizationConfig(ell=ell, iterations=i, strategy=fixed(alpha)), 0.0)
    ar = iat_solve(op, y, RegularizationConfig(ell=ell, iterations=i, strategy=fixed(alpha)), 0.0)
    # per-method definitional consistency: x = V z with z from its own factor
    from kryreg import arnoldi_decompose

    d_gk = golub_kahan_bidiagonalize(op, y, ell)
    d_ar = arnoldi_decompose(op, y, ell)
    for report, method, d in ((gk, "igkt", d_gk), (ar, "iat", d_ar)):
        assert report.method == method
        z = reduced_iterated_tikhonov(d.matrix, d.left.T @ y, alpha, i)
        assert np.linalg.norm(report.x - d.right @ z) <= 1e-10 * np.linalg.norm(report.x)
        assert np.linalg.norm(report.x) == pytest.approx(
            np.linalg.norm(report.z), rel=1e-10
        )


def test_shift_identity_on_dense_instance():
    op = random_operator(241, 9, 7)
    y = RandomStream(242).gaussian(9)
    d = golub_kahan_bidiagonalize(op, y, 5)
    t_ell = d.left @ d.matrix @ d.right.T
    alpha = 0.6
    lhs = np.linalg.solve(t_ell.T @ t_ell + alpha * np.eye(7), d.right)
    rhs = d.right @ np.linalg.inv(d.matrix.T @ d.matrix + alpha * np.eye(5))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_error_monotone_in_iterations_noise_free():
    a = random_dense(243, 6, 6) + 2.0 * np.eye(6)
    x_true = RandomStream(244).gaussian(6)
    y = a @ x_true
    alpha = 1e-3  # below the sigma_min^2 scale
    errs = [
        np.linalg.norm(x_true - iterated_tikhonov_full(a, y, alpha, i))
        for i in range(1, 12)
    ]
    assert all(e2 <= e1 + 1e-13 for e1, e2 in zip(errs, errs[1:]))


def test_infeasible_gives_structured_report():
    op = random_operator(245, 8, 6)
    y = RandomStream(246).gaussian(8)
    cfg = RegularizationConfig(
        ell=4, iterations=2, strategy=ParamStrategy(variant="b-tau", tau=1.0)
    )
    report = igkt_solve(op, y, cfg, delta=10.0 * np.linalg.norm(y))
    assert not report.feasible
    assert report.alpha is None and report.x is None and report.rel_error is None
    assert report.ell_eff == 4


def test_iat_rejects_rectangular_operator():
    op = tomography_parallel(4, 6, 5)
    y = np.ones(op.n_rows)
    cfg = RegularizationConfig(ell=3, iterations=1, strategy=fixed(1.0))
    with pytest.raises(NonSquareOperatorError):
        iat_solve(op, y, cfg, delta=0.0)


def test_selfref_strategy_end_to_end():
    # rapidly decaying spectrum, so h_ell is tiny at ell=6, the rule is
    # feasible and the fixed-point sweep contracts quickly
    raw = random_dense(247, 10, 8)
    u, _, vt = np.linalg.svd(raw, full_matrices=False)
    a = u @ np.diag(4.0 ** -np.arange(8.0)) @ vt
    op = LinearOperator.from_matrix(a)
    x_true = RandomStream(248).gaussian(8)
    y = a @ x_true
    noise = RandomStream(249).gaussian(10)
    y_delta = y + 0.01 * np.linalg.norm(y) / np.linalg.norm(noise) * noise
    delta = 0.01 * np.linalg.norm(y)
    cfg = RegularizationConfig(
        ell=6, iterations=2, strategy=ParamStrategy(variant="a-selfref", c=1.0, d=1.0)
    )
    report = igkt_solve(op, y_delta, cfg, delta=delta, x_dagger=x_true)
    assert report.feasible and report.alpha > 0
    assert report.param_converged
    assert report.rel_error is not None


def test_rel_error_matches_definition():
    op = random_operator(251, 9, 7)
    x_true = RandomStream(252).gaussian(7)
    y = op.apply(x_true)
    cfg = RegularizationConfig(ell=5, iterations=1, strategy=fixed(0.5))
    report = igkt_solve(op, y, cfg, delta=0.0, x_dagger=x_true)
    manual = np.linalg.norm(x_true - report.x) / np.linalg.norm(x_true)
    assert report.rel_error == pytest.approx(manual, rel=1e-15)


def test_prepared_subspace_reuse_matches_one_shot():
    op = random_operator(253, 11, 8)
    y = RandomStream(254).gaussian(11)
    cfg = RegularizationConfig(ell=6, iterations=3, strategy=fixed(0.25))
    prep = prepare_subspace(op, y, cfg, "igkt")
    for i in (1, 3, 7):
        again = solve_on_subspace(prep, i, cfg.strategy, 0.0)
        one_shot = igkt_solve(
            op, y, RegularizationConfig(ell=6, iterations=i, strategy=fixed(0.25)), 0.0
        )
        assert np.allclose(again.x, one_shot.x, rtol=0, atol=1e-12)


def test_degenerate_subspace_reports_infeasible():
    # adjoint of the data vector vanishes: no Krylov space to work in
    t = np.array([[0.0, 1.0], [0.0, 0.0]])
    op = LinearOperator.from_matrix(t)
    y = np.array([0.0, 1.0])  # T* y = 0
    cfg = RegularizationConfig(
        ell=1, iterations=1, strategy=ParamStrategy(variant="b-tau")
    )
    report = igkt_solve(op, y, cfg, delta=1e-3)
    assert not report.feasible
    assert report.ell_eff == 0
