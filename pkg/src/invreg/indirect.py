"""Indirect estimators of the forward coefficient matrix and the estimator registry.

An indirect estimate combines plug-in estimates of the inverse regression
(eta, Delta^-1) and of the response precision Sigma_YY^-1:

    beta_hat = Delta^-1 eta' (Sigma_YY^-1 + eta Delta^-1 eta')^-1

Named estimators:
- I_L1: lasso eta, graphical-lasso Delta^-1 and Sigma_YY^-1
- I_S: lasso eta, sample Delta and Sigma_YY, inverted
- I_L2: lasso eta, ridge-precision Delta^-1, graphical-lasso Sigma_YY^-1
- O: lasso eta, true Delta^-1 and Sigma_YY^-1
- O_delta: lasso eta, true Delta^-1, graphical-lasso Sigma_YY^-1
- O_Y: lasso eta, graphical-lasso Delta^-1, true Sigma_YY^-1
- I_r: reduced-rank eta, graphical-lasso Delta^-1 and Sigma_YY^-1
- I_ML_r: reduced-rank eta and its likelihood Delta^-1, sample Sigma_YY^-1
- O_r: reduced-rank eta, true Delta^-1 and Sigma_YY^-1
- O_delta_r: reduced-rank eta, graphical-lasso Delta^-1, true Sigma_YY^-1
- O_Y_r: reduced-rank eta, true Delta^-1, graphical-lasso Sigma_YY^-1
- POP: every plug-in at its true value
- OLS_MP, R, L2, L1, RR: forward baselines

Within one dataset the lasso eta (and the reduced-rank eta) is fit once and
shared by every estimator that uses it; IndirectFitter holds that cache.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable

import numpy as np
import numpy.typing as npt

from invreg.config import Settings
from invreg.errors import EstimatorUndefined, MissingOracle, NotPositiveDefinite, ShapeMismatch
from invreg.matlin import (
    Matrix,
    as_matrix,
    as_spd,
    assemble_forward,
    numerical_rank,
    spd_inverse,
    spd_solve,
)
from invreg.rrr import RrrFit, rrr_forward, rrr_inverse
from invreg.simgen import Dataset, JointGroundTruth
from invreg.sparse_est import (
    PenaltyKind,
    PrecisionProblem,
    RidgeMode,
    eta_lasso,
    glasso,
    lasso_forward,
    ols,
    ridge_ls,
    ridge_precision,
    sample_covariance,
)
from invreg.tuning import (
    FoldPlan,
    Grid,
    Selection,
    cv_lasso_forward,
    cv_lasso_lambdas,
    cv_rank,
    cv_ridge,
    cv_validation_likelihood,
    fold_covariances,
    make_folds,
)

logger = logging.getLogger(__name__)

ESTIMATOR_NAMES: tuple[str, ...] = (
    "I_L1", "I_S", "I_L2", "I_r", "I_ML_r",
    "O", "O_delta", "O_Y", "O_r", "O_delta_r", "O_Y_r",
    "OLS_MP", "R", "L2", "L1", "RR", "POP",
)
ORACLE_NAMES = frozenset({"O", "O_delta", "O_Y", "O_r", "O_delta_r", "O_Y_r", "POP"})

_ALIASES = {
    "OLS": "OLS_MP",
    "MP": "OLS_MP",
    "l1": "L1",
    "l2": "L2",
    "I_ML^(r)": "I_ML_r",
    "I^(r)": "I_r",
}


def canonical_name(name: str) -> str:
    """Registry name for an estimator, accepting the table labels OLS, MP, l1, l2.

    Raises:
        ValueError: If the name is unknown.
    """
    resolved = _ALIASES.get(name.strip(), name.strip())
    if resolved not in ESTIMATOR_NAMES:
        known = ", ".join(ESTIMATOR_NAMES)
        raise ValueError(f"Unknown estimator {name!r}\nKnown estimators: {known}")
    return resolved


# =============================================================================
# TYPES
# =============================================================================


@dataclass(frozen=True)
class InversePlugins:
    """Plug-in estimates of (eta, Delta^-1, Sigma_YY^-1); both precisions positive definite."""

    eta_hat: Matrix
    delta_inv_hat: Matrix
    sigma_yy_inv_hat: Matrix

    def __post_init__(self) -> None:
        eta = as_matrix(self.eta_hat)
        q, p = eta.shape
        delta_inv = as_spd(self.delta_inv_hat)
        sigma_yy_inv = as_spd(self.sigma_yy_inv_hat)
        if delta_inv.shape != (p, p) or sigma_yy_inv.shape != (q, q):
            raise ShapeMismatch(
                f"eta is {q}x{p} but Delta^-1 is {delta_inv.shape} "
                f"and Sigma_YY^-1 is {sigma_yy_inv.shape}"
            )
        object.__setattr__(self, "eta_hat", eta)
        object.__setattr__(self, "delta_inv_hat", delta_inv)
        object.__setattr__(self, "sigma_yy_inv_hat", sigma_yy_inv)


@dataclass(frozen=True)
class EstimatorSpec:
    """A named estimator with its tuning policy.

    Attributes:
        name: Registry name (see ESTIMATOR_NAMES).
        settings: Grid, fold count and solver tolerances.
        fold_seed: Seed of the cross-validation fold plan.
        oracle: True plug-ins; required by the oracle estimators, forbidden otherwise.
    """

    name: str
    settings: Settings = field(default_factory=Settings)
    fold_seed: int = 0
    oracle: InversePlugins | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", canonical_name(self.name))
        if self.oracle is not None and not self.is_oracle:
            raise ValueError(f"Estimator {self.name} does not use ground truth")

    @property
    def is_oracle(self) -> bool:
        return self.name in ORACLE_NAMES


@dataclass(frozen=True)
class BetaEstimate:
    """Fitted forward coefficients, intercept and tuning metadata."""

    beta_hat: Matrix
    intercept_hat: npt.NDArray[np.float64]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.beta_hat)) and np.all(np.isfinite(self.intercept_hat))):
            name = self.metadata.get("estimator")
            raise EstimatorUndefined(f"Estimator {name} produced non-finite values")


# =============================================================================
# ASSEMBLY
# =============================================================================


def assemble_beta(plugins: InversePlugins) -> Matrix:
    """beta_hat = Delta^-1 eta' (Sigma_YY^-1 + eta Delta^-1 eta')^-1 (p x q).

    Raises:
        NotPositiveDefinite: If a precision plug-in is not positive definite.
    """
    return assemble_forward(plugins.delta_inv_hat, plugins.eta_hat, plugins.sigma_yy_inv_hat)


def rank_of(beta_hat: npt.ArrayLike) -> int:
    """Numerical rank (singular values above 1e-8 times the largest)."""
    return numerical_rank(beta_hat)


def sample_plugins(data: Dataset) -> InversePlugins:
    """Ordinary sample estimates: least-squares eta, residual Delta, Y'Y/n.

    With n > max(p, q) these reproduce the least-squares forward coefficients.

    Raises:
        NotPositiveDefinite: If Y'Y or the residual covariance is singular.
    """
    x, y = data.x_centered, data.y_centered
    eta = spd_solve(y.T @ y, y.T @ x)
    delta = sample_covariance(x - y @ eta)
    return InversePlugins(eta, spd_inverse(delta), spd_inverse(sample_covariance(y)))


def population_plugins(truth: JointGroundTruth) -> InversePlugins:
    """True (eta*, Delta*^-1, Sigma*_YY^-1)."""
    return InversePlugins(truth.eta_star, truth.delta_inv_star, truth.sigma_yy_inv_star)


def predict(estimate: BetaEstimate, raw_x: npt.ArrayLike) -> Matrix:
    """mu_hat + beta_hat' x for every row of raw (uncentred) predictors."""
    x = as_matrix(raw_x)
    if x.shape[1] != estimate.beta_hat.shape[0]:
        raise ShapeMismatch(
            f"Model has {estimate.beta_hat.shape[0]} predictors, data has {x.shape[1]}"
        )
    return np.asarray(x @ estimate.beta_hat + estimate.intercept_hat)


# =============================================================================
# FITTER
# =============================================================================


@dataclass(frozen=True)
class _Tuned:
    """A fitted matrix and the selections that produced it."""
    value: Matrix
    selections: tuple[Selection, ...] = ()


class IndirectFitter:
    """Fits registry estimators on one dataset, sharing plug-ins between them.

    The fold plan, the lasso eta, the reduced-rank eta and every tuned
    precision plug-in are computed on first use and reused by every later fit.

    Args:
        data: Centred training data.
        settings: Grid, folds and solver tolerances.
        fold_seed: Seed of the fold plan.
        oracle: True plug-ins for the oracle estimators.
    """

    def __init__(self, data: Dataset, settings: Settings | None = None, fold_seed: int = 0,
                 oracle: InversePlugins | None = None):
        self.data = data
        self.settings = settings or Settings()
        self.fold_seed = fold_seed
        self.oracle = oracle
        self._dispatch: dict[str, Callable[[], tuple[Matrix, dict[str, Any]]]] = {
            "I_L1": self._i_l1,
            "I_S": self._i_s,
            "I_L2": self._i_l2,
            "O": lambda: self._lasso_oracle(true_delta=True, true_yy=True),
            "O_delta": lambda: self._lasso_oracle(true_delta=True, true_yy=False),
            "O_Y": lambda: self._lasso_oracle(true_delta=False, true_yy=True),
            "I_r": self._i_r,
            "I_ML_r": self._i_ml_r,
            "O_r": lambda: self._rank_oracle(true_delta=True, true_yy=True),
            "O_delta_r": lambda: self._rank_oracle(true_delta=False, true_yy=True),
            "O_Y_r": lambda: self._rank_oracle(true_delta=True, true_yy=False),
            "POP": self._pop,
            "OLS_MP": self._ols,
            "R": lambda: self._ridge("single"),
            "L2": lambda: self._ridge("per-response"),
            "L1": self._l1,
            "RR": self._rr,
        }

    # ----- shared pieces -----

    @cached_property
    def plan(self) -> FoldPlan:
        return make_folds(self.data.n, self.settings.folds, self.fold_seed)

    @cached_property
    def grid(self) -> Grid:
        return Grid(self.settings.grid)

    @cached_property
    def lasso_eta(self) -> _Tuned:
        """Column-wise lasso eta with per-column CV penalties."""
        s = self.settings
        selections = cv_lasso_lambdas(
            self.data.y_centered, self.data.x_centered, self.grid, self.plan,
            tol=s.cv_lasso_tol, max_sweeps=s.cv_lasso_max_sweeps,
        )
        lambdas = np.array([sel.value for sel in selections])
        eta = eta_lasso(self.data, lambdas, tol=s.lasso_tol, max_sweeps=s.lasso_max_sweeps)
        logger.debug(f"Lasso eta: {int(np.sum(eta != 0))} of {eta.size} entries non-zero")
        return _Tuned(eta, tuple(selections))

    @cached_property
    def rank_fit(self) -> tuple[RrrFit, Selection]:
        """Reduced-rank inverse regression at the CV rank."""
        selection = cv_rank(self.data, "inverse", self.plan)
        return rrr_inverse(self.data, int(selection.value)), selection

    def _tuned_precision(self, z: Matrix, kind: PenaltyKind) -> _Tuned:
        s = self.settings
        selection = cv_validation_likelihood(
            fold_covariances(z, self.plan), self.grid, kind,
            tol=s.cv_glasso_tol, max_iter=s.glasso_max_iter,
        )
        problem = PrecisionProblem(sample_covariance(z), selection.value, kind)
        if kind == "l1-offdiag":
            omega = glasso(problem, tol=s.glasso_tol, max_iter=s.glasso_max_iter)
        else:
            omega = ridge_precision(problem)
        return _Tuned(omega, (selection,))

    @cached_property
    def sigma_yy_inv_glasso(self) -> _Tuned:
        return self._tuned_precision(self.data.y_centered, "l1-offdiag")

    def _residuals(self, eta: Matrix) -> Matrix:
        return self.data.x_centered - self.data.y_centered @ eta

    @cached_property
    def delta_inv_glasso(self) -> _Tuned:
        return self._tuned_precision(self._residuals(self.lasso_eta.value), "l1-offdiag")

    @cached_property
    def delta_inv_ridge(self) -> _Tuned:
        return self._tuned_precision(self._residuals(self.lasso_eta.value), "l2-all")

    @cached_property
    def rank_delta_inv_glasso(self) -> _Tuned:
        return self._tuned_precision(self._residuals(self.rank_fit[0].coef), "l1-offdiag")

    def _require_oracle(self, name: str) -> InversePlugins:
        if self.oracle is None:
            raise MissingOracle(f"Estimator {name} needs the true plug-ins; pass ground truth")
        return self.oracle

    # ----- metadata helpers -----

    def _lasso_metadata(self) -> dict[str, Any]:
        sels = self.lasso_eta.selections
        return {
            "lambda": [sel.value for sel in sels],
            "eta_source": "lasso, shared across I_L1, I_S, I_L2 and the O family",
            "standardized": False,
            "endpoints": [f"lambda[{j}]" for j, sel in enumerate(sels) if sel.at_endpoint],
        }

    def _rank_metadata(self) -> dict[str, Any]:
        fit, sel = self.rank_fit
        return {
            "rank": fit.rank,
            "eta_source": "reduced rank, shared across I_r, I_ML_r and the O_r family",
            "endpoints": ["rank"] if sel.at_endpoint else [],
        }

    @staticmethod
    def _add_precision(meta: dict[str, Any], key: str, tuned: _Tuned) -> None:
        sel = tuned.selections[0]
        meta[key] = sel.value
        if sel.at_endpoint:
            meta.setdefault("endpoints", []).append(key)

    # ----- indirect estimators -----

    def _i_l1(self) -> tuple[Matrix, dict[str, Any]]:
        meta = self._lasso_metadata()
        self._add_precision(meta, "gamma_delta", self.delta_inv_glasso)
        self._add_precision(meta, "gamma_yy", self.sigma_yy_inv_glasso)
        plugins = InversePlugins(
            self.lasso_eta.value, self.delta_inv_glasso.value, self.sigma_yy_inv_glasso.value
        )
        return assemble_beta(plugins), meta

    def _i_s(self) -> tuple[Matrix, dict[str, Any]]:
        eta = self.lasso_eta.value
        try:
            delta_inv = spd_inverse(sample_covariance(self._residuals(eta)))
            sigma_yy_inv = spd_inverse(sample_covariance(self.data.y_centered))
        except NotPositiveDefinite as e:
            raise EstimatorUndefined(
                f"I_S needs nonsingular sample covariances (n={self.data.n}, p={self.data.p}, "
                f"q={self.data.q})"
            ) from e
        return assemble_beta(InversePlugins(eta, delta_inv, sigma_yy_inv)), self._lasso_metadata()

    def _i_l2(self) -> tuple[Matrix, dict[str, Any]]:
        meta = self._lasso_metadata()
        self._add_precision(meta, "gamma_delta", self.delta_inv_ridge)
        self._add_precision(meta, "gamma_yy", self.sigma_yy_inv_glasso)
        plugins = InversePlugins(
            self.lasso_eta.value, self.delta_inv_ridge.value, self.sigma_yy_inv_glasso.value
        )
        return assemble_beta(plugins), meta

    def _lasso_oracle(self, true_delta: bool, true_yy: bool) -> tuple[Matrix, dict[str, Any]]:
        oracle = self._require_oracle("O")
        meta = self._lasso_metadata()
        if true_delta:
            delta_inv = oracle.delta_inv_hat
        else:
            delta_inv = self.delta_inv_glasso.value
            self._add_precision(meta, "gamma_delta", self.delta_inv_glasso)
        if true_yy:
            sigma_yy_inv = oracle.sigma_yy_inv_hat
        else:
            sigma_yy_inv = self.sigma_yy_inv_glasso.value
            self._add_precision(meta, "gamma_yy", self.sigma_yy_inv_glasso)
        plugins = InversePlugins(self.lasso_eta.value, delta_inv, sigma_yy_inv)
        return assemble_beta(plugins), meta

    def _i_r(self) -> tuple[Matrix, dict[str, Any]]:
        meta = self._rank_metadata()
        self._add_precision(meta, "gamma_delta", self.rank_delta_inv_glasso)
        self._add_precision(meta, "gamma_yy", self.sigma_yy_inv_glasso)
        plugins = InversePlugins(
            self.rank_fit[0].coef, self.rank_delta_inv_glasso.value, self.sigma_yy_inv_glasso.value
        )
        return assemble_beta(plugins), meta

    def _i_ml_r(self) -> tuple[Matrix, dict[str, Any]]:
        fit = self.rank_fit[0]
        sigma_yy_inv = spd_inverse(sample_covariance(self.data.y_centered))
        plugins = InversePlugins(fit.coef, fit.precision, sigma_yy_inv)
        return assemble_beta(plugins), self._rank_metadata()

    def _rank_oracle(self, true_delta: bool, true_yy: bool) -> tuple[Matrix, dict[str, Any]]:
        oracle = self._require_oracle("O_r")
        meta = self._rank_metadata()
        if true_delta:
            delta_inv = oracle.delta_inv_hat
        else:
            delta_inv = self.rank_delta_inv_glasso.value
            self._add_precision(meta, "gamma_delta", self.rank_delta_inv_glasso)
        if true_yy:
            sigma_yy_inv = oracle.sigma_yy_inv_hat
        else:
            sigma_yy_inv = self.sigma_yy_inv_glasso.value
            self._add_precision(meta, "gamma_yy", self.sigma_yy_inv_glasso)
        plugins = InversePlugins(self.rank_fit[0].coef, delta_inv, sigma_yy_inv)
        return assemble_beta(plugins), meta

    def _pop(self) -> tuple[Matrix, dict[str, Any]]:
        return assemble_beta(self._require_oracle("POP")), {"eta_source": "population"}

    # ----- forward baselines -----

    def _ols(self) -> tuple[Matrix, dict[str, Any]]:
        full_rank = numerical_rank(self.data.x_centered) == self.data.p
        return ols(self.data), {"solution": "least squares" if full_rank else "Moore-Penrose"}

    def _ridge(self, mode: RidgeMode) -> tuple[Matrix, dict[str, Any]]:
        sels = cv_ridge(self.data, self.grid, self.plan, mode)
        lambdas = [sel.value for sel in sels]
        beta = ridge_ls(self.data, mode, lambdas if mode == "per-response" else lambdas[0])
        endpoints = [f"lambda[{m}]" for m, sel in enumerate(sels) if sel.at_endpoint]
        return beta, {"lambda": lambdas, "endpoints": endpoints}

    def _l1(self) -> tuple[Matrix, dict[str, Any]]:
        s = self.settings
        sels = cv_lasso_forward(self.data, self.grid, self.plan, tol=s.cv_lasso_tol,
                                max_sweeps=s.cv_lasso_max_sweeps)
        lambdas = np.array([sel.value for sel in sels])
        beta = lasso_forward(self.data, lambdas, tol=s.lasso_tol, max_sweeps=s.lasso_max_sweeps)
        endpoints = [f"lambda[{m}]" for m, sel in enumerate(sels) if sel.at_endpoint]
        return beta, {"lambda": lambdas.tolist(), "standardized": False, "endpoints": endpoints}

    def _rr(self) -> tuple[Matrix, dict[str, Any]]:
        selection = cv_rank(self.data, "forward", self.plan)
        fit = rrr_forward(self.data, int(selection.value))
        return fit.coef, {"rank": fit.rank, "endpoints": ["rank"] if selection.at_endpoint else []}

    # ----- public -----

    def fit(self, name: str) -> BetaEstimate:
        """Fit a registry estimator by name.

        Raises:
            MissingOracle: If an oracle estimator is requested without true plug-ins.
            EstimatorUndefined: If the estimator has no value on this dataset.
        """
        key = canonical_name(name)
        if key in ORACLE_NAMES:
            self._require_oracle(key)
        beta, meta = self._dispatch[key]()
        intercept = self.data.y_mean - beta.T @ self.data.x_mean
        meta = {"estimator": key, **meta}
        meta.setdefault("endpoints", [])
        return BetaEstimate(beta_hat=beta, intercept_hat=intercept, metadata=meta)


def fit(spec: EstimatorSpec, data: Dataset, truth: JointGroundTruth | None = None) -> BetaEstimate:
    """Fit one estimator on one dataset.

    Args:
        spec: Estimator name and tuning policy.
        data: Centred dataset.
        truth: Ground truth; supplies the oracle plug-ins when spec.oracle is unset.

    Raises:
        MissingOracle: If an oracle estimator has neither spec.oracle nor truth.
    """
    oracle = spec.oracle
    if oracle is None and truth is not None and spec.is_oracle:
        oracle = population_plugins(truth)
    if spec.is_oracle and oracle is None:
        raise MissingOracle(f"Estimator {spec.name} needs ground truth")
    fitter = IndirectFitter(data, spec.settings, spec.fold_seed, oracle)
    return fitter.fit(spec.name)
