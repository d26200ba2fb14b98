"""Tests for invreg.indirect module."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from invreg.errors import EstimatorUndefined, MissingOracle, ShapeMismatch
from invreg.indirect import (
    ESTIMATOR_NAMES,
    ORACLE_NAMES,
    BetaEstimate,
    EstimatorSpec,
    IndirectFitter,
    InversePlugins,
    assemble_beta,
    canonical_name,
    fit,
    population_plugins,
    predict,
    rank_of,
    sample_plugins,
)
from invreg.simgen import SparseInverseModelSpec, center, generate
from invreg.sparse_est import ols
from tests.conftest import random_spd


class TestRegistry:
    """Tests for canonical_name and EstimatorSpec."""

    @pytest.mark.parametrize(
        ("label", "name"),
        [("OLS", "OLS_MP"), ("MP", "OLS_MP"), ("l1", "L1"), ("l2", "L2"), ("I_L1", "I_L1")],
    )
    def test_aliases(self, label, name):
        """Table labels resolve to registry names."""
        assert canonical_name(label) == name

    def test_unknown_name(self):
        """An unregistered name raises ValueError listing the known ones."""
        with pytest.raises(ValueError, match="Known estimators"):
            canonical_name("lasso")

    def test_oracles_are_registered(self):
        """Every oracle name is a registry name."""
        assert ORACLE_NAMES <= set(ESTIMATOR_NAMES)

    def test_spec_canonicalizes(self):
        """EstimatorSpec stores the registry name."""
        assert EstimatorSpec("OLS").name == "OLS_MP"
        assert EstimatorSpec("O_Y").is_oracle

    def test_truth_on_non_oracle_rejected(self, sparse_case):
        """Passing true plug-ins to a data-only estimator raises ValueError."""
        truth, _ = sparse_case
        with pytest.raises(ValueError):
            EstimatorSpec("I_L1", oracle=population_plugins(truth))


class TestAssembly:
    """Tests for InversePlugins, assemble_beta and rank_of."""

    def test_scalar_hand_computation(self):
        """p=q=1 with eta=0.5, Delta^-1=2/3, Sigma_YY^-1=0.5 gives 0.5."""
        plugins = InversePlugins(np.array([[0.5]]), np.array([[2.0 / 3.0]]), np.array([[0.5]]))
        assert assemble_beta(plugins)[0, 0] == pytest.approx(0.5, rel=1e-14)

    def test_zero_eta(self, rng):
        """eta = 0 gives beta = 0."""
        plugins = InversePlugins(np.zeros((3, 4)), random_spd(rng, 4), random_spd(rng, 3))
        assert not np.any(assemble_beta(plugins))

    def test_sample_plugins_reproduce_ols(self):
        """Sample plug-ins assemble to least squares to 1e-8 relative on 100 datasets."""
        rng = np.random.default_rng(17)
        for seed in range(100):
            rho_y, rho_delta = (float(v) for v in rng.choice([0.0, 0.5, 0.7, 0.9], size=2))
            spec = SparseInverseModelSpec(200, 8, 8, rho_y, rho_delta, 0.3, seed)
            _, data = generate(spec)
            beta = assemble_beta(sample_plugins(data))
            expected = ols(data)
            assert np.linalg.norm(beta - expected) <= 1e-8 * np.linalg.norm(expected), spec

    def test_population_plugins_give_beta_star(self, sparse_case):
        """True plug-ins assemble to beta* to 1e-9."""
        truth, _ = sparse_case
        assert_allclose(assemble_beta(population_plugins(truth)), truth.beta_star, atol=1e-9)

    def test_rank_propagates(self):
        """rank(beta_hat) = rank(eta_hat) for every r and 100 random plug-in pairs."""
        rng = np.random.default_rng(12)
        p, q = 12, 10
        for _ in range(100):
            delta_inv = random_spd(rng, p)
            sigma_yy_inv = random_spd(rng, q)
            for r in range(q + 1):
                eta = rng.standard_normal((q, r)) @ rng.standard_normal((r, p))
                beta = assemble_beta(InversePlugins(eta, delta_inv, sigma_yy_inv))
                assert rank_of(beta) == r

    def test_identity_padded_rank(self):
        """A padded identity has rank min(p, q)."""
        assert rank_of(np.eye(5, 3)) == 3
        assert rank_of(np.zeros((4, 2))) == 0

    def test_plugin_shape_mismatch(self, rng):
        """Precisions must match eta's shape."""
        with pytest.raises(ShapeMismatch):
            InversePlugins(np.zeros((3, 4)), random_spd(rng, 3), random_spd(rng, 3))


class TestBetaEstimate:
    """Tests for BetaEstimate and predict."""

    def test_non_finite_rejected(self):
        """NaN coefficients raise EstimatorUndefined."""
        with pytest.raises(EstimatorUndefined):
            BetaEstimate(np.array([[np.nan]]), np.zeros(1), {"estimator": "I_L1"})

    def test_predict_adds_intercept(self):
        """Predictions are x' beta + intercept."""
        est = BetaEstimate(np.array([[2.0], [0.0]]), np.array([1.0]))
        assert_allclose(predict(est, [[1.0, 5.0], [0.0, 0.0]]), [[3.0], [1.0]])

    def test_predict_shape_mismatch(self):
        """Raw data with the wrong predictor count raises ShapeMismatch."""
        est = BetaEstimate(np.ones((2, 1)), np.zeros(1))
        with pytest.raises(ShapeMismatch):
            predict(est, np.ones((3, 3)))


class TestIndirectFitter:
    """Tests for IndirectFitter and fit."""

    def test_every_estimator_runs(self, sparse_case, fast_settings):
        """Each registry estimator gives finite p x q coefficients."""
        truth, data = sparse_case
        fitter = IndirectFitter(data, fast_settings, oracle=population_plugins(truth))
        for name in ESTIMATOR_NAMES:
            est = fitter.fit(name)
            assert est.beta_hat.shape == (data.p, data.q)
            assert est.metadata["estimator"] == name
            assert isinstance(est.metadata["endpoints"], list)

    def test_lasso_eta_is_shared(self, sparse_case, fast_settings):
        """I_L1, I_S and I_L2 reuse one lasso eta."""
        _, data = sparse_case
        fitter = IndirectFitter(data, fast_settings)
        fitter.fit("I_L1")
        first = fitter.lasso_eta
        fitter.fit("I_S")
        fitter.fit("I_L2")
        assert fitter.lasso_eta is first

    def test_lasso_metadata(self, sparse_case, fast_settings):
        """I_L1 records one lambda per eta column and both precision penalties."""
        _, data = sparse_case
        meta = IndirectFitter(data, fast_settings).fit("I_L1").metadata
        assert len(meta["lambda"]) == data.p
        assert meta["gamma_delta"] > 0
        assert meta["gamma_yy"] > 0
        assert meta["standardized"] is False

    def test_reduced_rank_rank_matches_metadata(self, rr_inverse_case, fast_settings):
        """I_r has the rank recorded in its metadata."""
        _, data = rr_inverse_case
        est = IndirectFitter(data, fast_settings).fit("I_r")
        assert rank_of(est.beta_hat) == est.metadata["rank"]

    def test_oracle_without_truth(self, sparse_case, fast_settings):
        """Oracle estimators without true plug-ins raise MissingOracle."""
        _, data = sparse_case
        with pytest.raises(MissingOracle):
            IndirectFitter(data, fast_settings).fit("O")
        with pytest.raises(MissingOracle):
            fit(EstimatorSpec("POP"), data)

    def test_pop_equals_beta_star(self, sparse_case):
        """POP reproduces beta* from the truth passed to fit."""
        truth, data = sparse_case
        est = fit(EstimatorSpec("POP"), data, truth)
        assert_allclose(est.beta_hat, truth.beta_star, atol=1e-9)

    def test_ols_recovers_noiseless_model(self, linear_data, linear_dataset):
        """OLS_MP on exact linear data recovers beta and the intercept."""
        x, y, beta, intercept = linear_data
        est = fit(EstimatorSpec("OLS_MP"), linear_dataset)
        assert_allclose(est.beta_hat, beta, atol=1e-9)
        assert_allclose(est.intercept_hat, intercept, atol=1e-9)
        assert_allclose(predict(est, x), y, atol=1e-8)
        assert est.metadata["solution"] == "least squares"

    def test_ols_moore_penrose_when_wide(self, rng):
        """p > n switches OLS_MP to the Moore-Penrose solution."""
        data = center(rng.standard_normal((6, 10)), rng.standard_normal((6, 2)))
        est = fit(EstimatorSpec("OLS"), data)
        assert est.metadata["solution"] == "Moore-Penrose"

    def test_sample_inverse_undefined_when_wide(self, rng, fast_settings):
        """I_S is undefined when the residual covariance is singular (n <= p)."""
        data = center(rng.standard_normal((6, 12)), rng.standard_normal((6, 3)))
        with pytest.raises(EstimatorUndefined):
            IndirectFitter(data, fast_settings).fit("I_S")


# Which plug-ins each oracle takes from the truth: (eta source, true Delta^-1, true Sigma_YY^-1).
ORACLE_PLUGINS = {
    "O": ("lasso", True, True),
    "O_delta": ("lasso", True, False),
    "O_Y": ("lasso", False, True),
    "O_r": ("rank", True, True),
    "O_delta_r": ("rank", False, True),
    "O_Y_r": ("rank", True, False),
}


def expected_oracle_beta(fitter, truth, source, true_delta, true_yy):
    """Assemble an oracle estimate by hand from the fitter's cached plug-ins and the truth."""
    if source == "lasso":
        eta, delta_est = fitter.lasso_eta.value, fitter.delta_inv_glasso.value
    else:
        eta, delta_est = fitter.rank_fit[0].coef, fitter.rank_delta_inv_glasso.value
    delta_inv = truth.delta_inv_star if true_delta else delta_est
    sigma_yy_inv = truth.sigma_yy_inv_star if true_yy else fitter.sigma_yy_inv_glasso.value
    return assemble_beta(InversePlugins(eta, delta_inv, sigma_yy_inv))


class TestOraclePlugins:
    """Tests for the plug-in mix of every part-oracle estimator."""

    @pytest.mark.parametrize("name", list(ORACLE_PLUGINS))
    def test_plugin_sources(self, name, request, fast_settings):
        """Each oracle uses the true plug-ins it names and glasso estimates for the rest."""
        source, true_delta, true_yy = ORACLE_PLUGINS[name]
        case = "sparse_case" if source == "lasso" else "rr_inverse_case"
        truth, data = request.getfixturevalue(case)
        fitter = IndirectFitter(data, fast_settings, oracle=population_plugins(truth))
        est = fitter.fit(name)
        expected = expected_oracle_beta(fitter, truth, source, true_delta, true_yy)
        assert_allclose(est.beta_hat, expected, rtol=1e-12, atol=1e-14)
        assert ("gamma_delta" in est.metadata) is not true_delta
        assert ("gamma_yy" in est.metadata) is not true_yy

    @pytest.mark.parametrize(
        ("first", "second"), [("O_delta", "O_Y"), ("O_delta_r", "O_Y_r")],
    )
    def test_mixed_oracles_differ(self, first, second, request, fast_settings):
        """The two one-sided oracles of a family give different estimates."""
        case = "rr_inverse_case" if first.endswith("_r") else "sparse_case"
        truth, data = request.getfixturevalue(case)
        fitter = IndirectFitter(data, fast_settings, oracle=population_plugins(truth))
        a, b = fitter.fit(first).beta_hat, fitter.fit(second).beta_hat
        assert not np.allclose(a, b, rtol=1e-6, atol=1e-8)
