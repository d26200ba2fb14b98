"""Tests for invreg.sparse_est module."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from invreg.errors import BadGamma, NoConvergence, ShapeMismatch, Singular, SingularInput
from invreg.simgen import center
from invreg.sparse_est import (
    LassoProblem,
    PrecisionProblem,
    descend,
    eta_lasso,
    glasso,
    glasso_kkt_residual,
    lasso_column,
    lasso_forward,
    lasso_gram,
    lasso_kkt_residual,
    lasso_objective,
    ols,
    precision_objective,
    ridge_ls,
    ridge_precision,
    ridge_precision_residual,
    sample_covariance,
)
from tests.conftest import random_spd


def sign_pattern_lasso(design, target, lam):
    """Exhaustive lasso oracle: try every sign pattern, keep the one satisfying KKT."""
    q = design.shape[1]
    gram = design.T @ design
    cross = design.T @ target
    for signs in itertools.product((-1, 0, 1), repeat=q):
        signs = np.array(signs, dtype=float)
        active = np.flatnonzero(signs)
        coef = np.zeros(q)
        if active.size:
            coef[active] = np.linalg.solve(
                gram[np.ix_(active, active)], cross[active] - lam * signs[active] / 2.0
            )
            if np.any(np.sign(coef[active]) != signs[active]):
                continue
        grad = 2.0 * (cross - gram @ coef)
        inactive = np.flatnonzero(signs == 0)
        if np.all(np.abs(grad[inactive]) <= lam + 1e-9):
            return coef
    raise AssertionError("no sign pattern satisfies the KKT conditions")


def proximal_glasso(s, gamma, iters=20_000):
    """Independent graphical-lasso solver: proximal gradient with backtracking."""
    def smooth(om):
        return float(np.sum(om * s) - np.linalg.slogdet(om)[1])

    def prox(om, t):
        diag = np.diag(np.diag(om))
        off = om - diag
        return diag + np.sign(off) * np.maximum(np.abs(off) - t * gamma, 0.0)

    omega = np.diag(1.0 / np.diag(s))
    step = 1.0
    for _ in range(iters):
        grad = s - np.linalg.inv(omega)
        while True:
            cand = prox(omega - step * grad, step)
            cand = (cand + cand.T) / 2.0
            if np.min(np.linalg.eigvalsh(cand)) > 0:
                diff = cand - omega
                bound = smooth(omega) + np.sum(grad * diff) + np.sum(diff**2) / (2.0 * step)
                if smooth(cand) <= bound + 1e-15:
                    break
            step /= 2.0
        moved = np.max(np.abs(cand - omega))
        omega = cand
        if moved < 1e-13:
            break
        step = min(step * 1.5, 10.0)
    return omega


def random_lasso_instance(rng, n, q):
    design = rng.standard_normal((n, q))
    target = design @ rng.standard_normal(q) + rng.standard_normal(n)
    lam = float(rng.uniform(0.02, 1.0)) * float(np.max(np.abs(2.0 * design.T @ target)))
    return design, target, lam


class TestLassoColumn:
    """Tests for lasso_column and the batched kernel."""

    def test_zero_penalty_is_least_squares(self, rng):
        """lambda = 0 on a full-rank design is ordinary least squares."""
        design = rng.standard_normal((30, 4))
        target = rng.standard_normal(30)
        coef = lasso_column(LassoProblem(design, target, 0.0))
        expected, *_ = np.linalg.lstsq(design, target, rcond=None)
        assert_allclose(coef, expected, atol=1e-8)

    def test_threshold_gives_zero(self, rng):
        """lambda >= 2 ||D't||_inf yields exactly zero."""
        design = rng.standard_normal((20, 3))
        target = rng.standard_normal(20)
        lam = 2.0 * float(np.max(np.abs(design.T @ target)))
        assert np.array_equal(lasso_column(LassoProblem(design, target, lam)), np.zeros(3))

    def test_matches_sign_pattern_oracle(self):
        """Small instances match the exhaustive sign-pattern solution."""
        rng = np.random.default_rng(4)
        for _ in range(60):
            q = int(rng.integers(1, 4))
            design, target, lam = random_lasso_instance(rng, 6 + q, q)
            coef = lasso_column(LassoProblem(design, target, lam))
            expected = sign_pattern_lasso(design, target, lam)
            assert_allclose(coef, expected, atol=1e-7 * max(1.0, np.max(np.abs(expected))))

    def test_kkt_residuals(self):
        """KKT residuals stay at solver precision on 200 random instances."""
        rng = np.random.default_rng(5)
        for _ in range(200):
            q = int(rng.integers(1, 9))
            design, target, lam = random_lasso_instance(rng, 25, q)
            coef = lasso_column(LassoProblem(design, target, lam))
            scale = max(1.0, float(np.max(np.abs(2.0 * design.T @ target))))
            assert lasso_kkt_residual(design, target, coef, lam) <= 1e-8 * scale

    def test_single_coordinate_perturbation(self):
        """No +-1e-4 move of one coordinate lowers the objective."""
        rng = np.random.default_rng(6)
        for _ in range(100):
            design, target, lam = random_lasso_instance(rng, 15, 4)
            coef = lasso_column(LassoProblem(design, target, lam))
            base = lasso_objective(design, target, coef, lam)[0]
            for m in range(4):
                for delta in (1e-4, -1e-4):
                    moved = coef.copy()
                    moved[m] += delta
                    value = lasso_objective(design, target, moved, lam)[0]
                    assert value >= base - 1e-10 * max(1.0, base)

    def test_sweep_cap_raises(self, rng):
        """One sweep on a correlated problem raises NoConvergence."""
        design = rng.standard_normal((30, 5))
        design[:, 1] = design[:, 0] + 0.01 * rng.standard_normal(30)
        target = design @ np.ones(5)
        with pytest.raises(NoConvergence):
            lasso_column(LassoProblem(design, target, 1e-3), max_sweeps=1)

    def test_descend_reports_per_column_convergence(self, rng):
        """descend returns a converged mask instead of raising."""
        design = rng.standard_normal((30, 5))
        design[:, 1] = design[:, 0] + 0.01 * rng.standard_normal(30)
        targets = np.column_stack([design @ np.ones(5), np.zeros(30)])
        result = descend(design.T @ design, design.T @ targets, [1e-3, 1.0], max_sweeps=1)
        assert result.converged.tolist() == [False, True]
        assert result.sweeps == 1

    def test_columns_are_independent(self, rng):
        """A batched fit equals column-by-column fits."""
        design = rng.standard_normal((25, 4))
        targets = rng.standard_normal((25, 3))
        lambdas = np.array([0.5, 5.0, 20.0])
        batched = lasso_gram(design.T @ design, design.T @ targets, lambdas)
        for k in range(3):
            single = lasso_column(LassoProblem(design, targets[:, k], lambdas[k]))
            assert_allclose(batched[:, k], single, atol=1e-9)

    def test_negative_penalty_rejected(self, rng):
        """Negative lambda raises ValueError."""
        with pytest.raises(ValueError):
            lasso_column(LassoProblem(np.eye(3), np.ones(3), -1.0))


class TestEtaLasso:
    """Tests for eta_lasso and lasso_forward."""

    def test_huge_penalties_give_zero(self, sparse_case):
        """Penalties above every threshold give the zero matrix."""
        _, data = sparse_case
        assert np.array_equal(eta_lasso(data, 1e12), np.zeros((data.q, data.p)))
        assert np.array_equal(lasso_forward(data, 1e12), np.zeros((data.p, data.q)))

    def test_zero_penalties_are_least_squares(self, sparse_case):
        """lambda = 0 reproduces the least-squares inverse regression."""
        _, data = sparse_case
        expected, *_ = np.linalg.lstsq(data.y_centered, data.x_centered, rcond=None)
        assert_allclose(eta_lasso(data, np.zeros(data.p)), expected, atol=1e-8)

    def test_forward_zero_penalty_is_ols(self, sparse_case):
        """lasso_forward at lambda = 0 equals ols."""
        _, data = sparse_case
        assert_allclose(lasso_forward(data, np.zeros(data.q)), ols(data), atol=1e-8)

    def test_permuting_predictors_permutes_columns(self, sparse_case):
        """Permuting the columns of X permutes the columns of eta_hat."""
        _, data = sparse_case
        perm = np.array([3, 0, 5, 1, 4, 2])
        lambdas = np.linspace(1.0, 30.0, data.p)
        base = eta_lasso(data, lambdas)
        permuted = center(data.x_centered[:, perm], data.y_centered)
        assert_allclose(eta_lasso(permuted, lambdas[perm]), base[:, perm], atol=1e-9)

    def test_forward_matches_oracle(self, rng):
        """Each forward lasso column matches the sign-pattern oracle."""
        x = rng.standard_normal((12, 3))
        y = x @ rng.standard_normal((3, 2)) + 0.5 * rng.standard_normal((12, 2))
        data = center(x, y)
        lambdas = np.array([1.0, 4.0])
        beta = lasso_forward(data, lambdas)
        for m in range(2):
            expected = sign_pattern_lasso(data.x_centered, data.y_centered[:, m], lambdas[m])
            assert_allclose(beta[:, m], expected, atol=1e-7)

    def test_wrong_penalty_count(self, sparse_case):
        """A penalty vector of the wrong length raises ShapeMismatch."""
        _, data = sparse_case
        with pytest.raises(ShapeMismatch):
            eta_lasso(data, np.ones(data.p + 1))


class TestGlasso:
    """Tests for glasso."""

    def test_zero_penalty_is_inverse(self, rng):
        """gamma = 0 returns S^-1."""
        s = random_spd(rng, 4)
        assert_allclose(glasso(PrecisionProblem(s, 0.0)), np.linalg.inv(s), atol=1e-6)

    def test_diagonal_input(self):
        """Diagonal S gives diag(1 / s_jj) for any gamma."""
        s = np.diag([1.0, 2.0, 4.0])
        assert_allclose(glasso(PrecisionProblem(s, 0.3)), np.diag([1.0, 0.5, 0.25]))

    def test_large_penalty_is_diagonal(self, rng):
        """gamma above every off-diagonal |s_jk| gives diag(1 / s_jj)."""
        s = random_spd(rng, 5)
        gamma = float(np.max(np.abs(s - np.diag(np.diag(s))))) + 0.01
        assert_allclose(glasso(PrecisionProblem(s, gamma)), np.diag(1.0 / np.diag(s)))

    @pytest.mark.parametrize("gamma", [0.02, 0.05, 0.1, 0.2])
    def test_kkt_and_independent_solver(self, gamma):
        """Stationarity holds and the objective matches a proximal-gradient solve (25 per gamma)."""
        rng = np.random.default_rng(int(gamma * 1000))
        for _ in range(25):
            dim = int(rng.integers(2, 11))
            z = rng.multivariate_normal(np.zeros(dim), random_spd(rng, dim), size=4 * dim + 20)
            s = sample_covariance(z - z.mean(axis=0))
            omega = glasso(PrecisionProblem(s, gamma), tol=1e-10)
            assert np.min(np.linalg.eigvalsh(omega)) > 0
            assert glasso_kkt_residual(omega, s, gamma) <= 1e-6
            reference = proximal_glasso(s, gamma)
            ours = precision_objective(omega, s, gamma, "l1-offdiag")
            theirs = precision_objective(reference, s, gamma, "l1-offdiag")
            assert ours == pytest.approx(theirs, abs=1e-6), dim

    def test_coordinate_order_invariance(self, rng):
        """Permuting coordinates permutes the estimate."""
        z = rng.multivariate_normal(np.zeros(4), random_spd(rng, 4), size=50)
        s = sample_covariance(z - z.mean(axis=0))
        perm = np.array([2, 0, 3, 1])
        base = glasso(PrecisionProblem(s, 0.05), tol=1e-10)
        permuted = glasso(PrecisionProblem(s[np.ix_(perm, perm)], 0.05), tol=1e-10)
        assert_allclose(permuted, base[np.ix_(perm, perm)], atol=1e-5)

    def test_singular_without_penalty(self):
        """gamma = 0 on a singular S raises SingularInput."""
        v = np.array([[1.0], [1.0]])
        with pytest.raises(SingularInput):
            glasso(PrecisionProblem(v @ v.T, 0.0))

    def test_zero_variance(self):
        """A zero variance raises SingularInput."""
        with pytest.raises(SingularInput):
            glasso(PrecisionProblem(np.diag([1.0, 0.0]), 0.1))

    def test_negative_penalty(self, rng):
        """gamma < 0 raises BadGamma."""
        with pytest.raises(BadGamma):
            glasso(PrecisionProblem(np.eye(2), -0.1))

    def test_iteration_cap(self, rng):
        """One outer iteration at a tiny tolerance raises NoConvergence."""
        s = np.array([[1.0, 0.8, 0.6], [0.8, 1.0, 0.7], [0.6, 0.7, 1.0]])
        with pytest.raises(NoConvergence):
            glasso(PrecisionProblem(s, 0.01), tol=1e-16, max_iter=1)


class TestRidgePrecision:
    """Tests for ridge_precision."""

    def test_identity_by_hand(self):
        """S = I, gamma = 1 gives 0.5 I."""
        omega = ridge_precision(PrecisionProblem(np.eye(3), 1.0, "l2-all"))
        assert_allclose(omega, 0.5 * np.eye(3), atol=1e-14)

    def test_small_penalty_approaches_inverse(self, rng):
        """gamma = 1e-12 is within 1e-4 relative of S^-1."""
        s = random_spd(rng, 4)
        omega = ridge_precision(PrecisionProblem(s, 1e-12, "l2-all"))
        inv = np.linalg.inv(s)
        assert np.linalg.norm(omega - inv) <= 1e-4 * np.linalg.norm(inv)

    def test_stationarity(self):
        """Residual of S - Omega^-1 + 2 gamma Omega is at most 1e-8 on 100 instances."""
        rng = np.random.default_rng(10)
        for _ in range(100):
            dim = int(rng.integers(1, 8))
            rank = int(rng.integers(1, dim + 1))
            a = rng.standard_normal((dim, rank))
            s = a @ a.T / rank
            gamma = float(rng.uniform(0.05, 2.0))
            omega = ridge_precision(PrecisionProblem(s, gamma, "l2-all"))
            assert ridge_precision_residual(omega, s, gamma) <= 1e-8

    def test_singular_input_is_handled(self, rng):
        """A rank-deficient S at gamma = 0.5 still meets stationarity."""
        a = rng.standard_normal((5, 2))
        s = a @ a.T
        omega = ridge_precision(PrecisionProblem(s, 0.5, "l2-all"))
        assert ridge_precision_residual(omega, s, 0.5) <= 1e-8
        assert np.min(np.linalg.eigvalsh(omega)) > 0

    def test_eigenvalues_decrease_with_variance(self):
        """theta_j is decreasing in d_j."""
        omega = ridge_precision(PrecisionProblem(np.diag([0.5, 1.0, 3.0]), 0.2, "l2-all"))
        diag = np.diag(omega)
        assert diag[0] > diag[1] > diag[2]

    def test_homogeneity(self, rng):
        """Scaling S by c and gamma by c^2 scales Omega by 1 / c."""
        s = random_spd(rng, 4)
        c = 3.0
        base = ridge_precision(PrecisionProblem(s, 0.3, "l2-all"))
        scaled = ridge_precision(PrecisionProblem(c * s, 0.3 * c * c, "l2-all"))
        assert_allclose(scaled, base / c, atol=1e-12)

    @pytest.mark.parametrize("gamma", [0.0, -1.0])
    def test_bad_gamma(self, gamma):
        """gamma <= 0 raises BadGamma."""
        with pytest.raises(BadGamma):
            ridge_precision(PrecisionProblem(np.eye(2), gamma, "l2-all"))


class TestRidgeLs:
    """Tests for ridge_ls."""

    def test_large_penalty_shrinks_to_zero(self, linear_dataset):
        """lambda -> infinity drives the coefficients to zero."""
        beta = ridge_ls(linear_dataset, "single", 1e12)
        assert np.max(np.abs(beta)) < 1e-8

    def test_zero_penalty_is_ols(self, linear_dataset):
        """lambda = 0 with n > p is least squares."""
        assert_allclose(ridge_ls(linear_dataset, "single", 0.0), ols(linear_dataset), atol=1e-9)

    def test_orthonormal_design(self, rng):
        """Orthonormal X gives X'y_m / (1 + lambda_m)."""
        raw = rng.standard_normal((20, 3))
        q_mat, _ = np.linalg.qr(raw - raw.mean(axis=0))
        data = center(q_mat, rng.standard_normal((20, 2)))
        lambdas = np.array([0.5, 2.0])
        beta = ridge_ls(data, "per-response", lambdas)
        expected = (data.x_centered.T @ data.y_centered) / (1.0 + lambdas)
        assert_allclose(beta, expected, atol=1e-10)

    def test_zero_penalty_rank_deficient(self, rng):
        """lambda = 0 on a rank-deficient design raises Singular."""
        x = rng.standard_normal((10, 2))
        data = center(np.column_stack([x, x[:, 0]]), rng.standard_normal((10, 1)))
        with pytest.raises(Singular):
            ridge_ls(data, "single", 0.0)

    def test_single_mode_takes_one_penalty(self, linear_dataset):
        """single mode rejects several penalties."""
        with pytest.raises(ShapeMismatch):
            ridge_ls(linear_dataset, "single", [1.0, 2.0])


class TestOls:
    """Tests for ols."""

    def test_noiseless_recovery(self, linear_data, linear_dataset):
        """Y = X B exactly recovers B."""
        _, _, beta, _ = linear_data
        assert_allclose(ols(linear_dataset), beta, atol=1e-9)

    def test_minimum_norm_when_wide(self, rng):
        """n < p gives the minimum-norm solution with residual orthogonal to col(X)."""
        data = center(rng.standard_normal((8, 12)), rng.standard_normal((8, 2)))
        beta = ols(data)
        x, y = data.x_centered, data.y_centered
        assert_allclose(x.T @ (y - x @ beta), 0.0, atol=1e-9)
        assert_allclose(beta, np.linalg.pinv(x) @ y, atol=1e-9)

    def test_single_response(self, rng):
        """q = 1 is univariate least squares."""
        x = rng.standard_normal((15, 3))
        y = rng.standard_normal((15, 1))
        data = center(x, y)
        expected, *_ = np.linalg.lstsq(data.x_centered, data.y_centered, rcond=None)
        assert_allclose(ols(data), expected, atol=1e-10)
