"""Penalized plug-in estimators.

Lasso problems use the raw objective ||t - D b||^2 + lambda * ||b||_1 (no 1/2,
no 1/n), so a grid of lambdas means the same thing at every sample size only
through the data scale. All lasso fits run on one batched coordinate-descent
kernel that works from a shared Gram matrix D'D, which lets the p columns of
eta (or the q columns of a forward fit) and every grid point be solved together.

Module structure:
- problems: LassoProblem, PrecisionProblem
- lasso: descend, lasso_gram, lasso_column, eta_lasso, lasso_forward
- precision: glasso, ridge_precision, sample_covariance
- least squares: ridge_ls, ridge_from_svd, ols
- diagnostics: lasso_objective, lasso_kkt_residual, precision_objective,
  glasso_kkt_residual, ridge_precision_residual
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg
from sklearn.covariance import graphical_lasso
from sklearn.exceptions import ConvergenceWarning

from invreg.config import Settings
from invreg.errors import (
    BadGamma,
    NoConvergence,
    NotPositiveDefinite,
    ShapeMismatch,
    Singular,
    SingularInput,
)
from invreg.matlin import (
    Matrix,
    as_matrix,
    log_det_spd,
    numerical_rank,
    pseudo_inverse,
    spd_inverse,
    sym_eigen,
    symmetrize,
)
from invreg.simgen import Dataset

logger = logging.getLogger(__name__)

PenaltyKind = Literal["l1-offdiag", "l2-all"]
RidgeMode = Literal["single", "per-response"]

_DEFAULTS = Settings()


# =============================================================================
# PROBLEMS
# =============================================================================


@dataclass(frozen=True)
class LassoProblem:
    """One column of the inverse-regression lasso.

    Attributes:
        design: n x q regressor matrix (the centred responses in the inverse fit).
        target_column: n-vector being regressed (one centred predictor column).
        lam: Non-negative penalty on the coefficient l1 norm.
    """

    design: Matrix
    target_column: npt.NDArray[np.float64]
    lam: float


@dataclass(frozen=True)
class PrecisionProblem:
    """Penalized Normal-likelihood precision problem.

    ``l1-offdiag`` penalizes the absolute off-diagonal entries (graphical lasso);
    ``l2-all`` penalizes the squares of every entry (ridge precision).
    """

    s: Matrix
    gamma: float
    penalty_kind: PenaltyKind = "l1-offdiag"


class DescentResult(NamedTuple):
    """Batched coordinate-descent output: coefficients, per-column convergence, sweeps used."""
    coef: Matrix
    converged: npt.NDArray[np.bool_]
    sweeps: int


# =============================================================================
# LASSO
# =============================================================================


def descend(gram: npt.ArrayLike, cross: npt.ArrayLike, lambdas: npt.ArrayLike,
            start: npt.ArrayLike | None = None, tol: float = _DEFAULTS.lasso_tol,
            max_sweeps: int = _DEFAULTS.lasso_max_sweeps) -> DescentResult:
    """Cyclic coordinate descent for many lasso targets sharing one Gram matrix.

    Column k minimizes b' G b - 2 c_k' b + lambdas[k] * ||b||_1, which is the
    lasso objective up to the constant ||t_k||^2 when G = D'D and c_k = D't_k.
    A column stops once its largest coordinate change in a sweep is at most
    tol * (1 + ||b_k||_inf); stopped columns are no longer touched.

    Args:
        gram: d x d Gram matrix.
        cross: d x k matrix (or d-vector) of design-target cross products.
        lambdas: Scalar or k-vector of non-negative penalties.
        start: Optional d x k warm start.
        tol: Relative coordinate-change tolerance.
        max_sweeps: Sweep cap.

    Returns:
        DescentResult; columns with converged False hit the cap.
    """
    g = symmetrize(gram)
    c = np.asarray(cross, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    dim, width = c.shape
    if g.shape[0] != dim:
        raise ShapeMismatch(f"Gram is {g.shape} but cross products are {c.shape}")
    lam = np.broadcast_to(np.asarray(lambdas, dtype=np.float64), (width,)).copy()
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError(f"Lasso penalties must be finite and non-negative, got {lam}")

    if start is None:
        coef = np.zeros((dim, width))
    else:
        coef = np.array(start, dtype=np.float64, copy=True).reshape(dim, width)
    diag = np.diag(g).copy()
    usable = np.flatnonzero(diag > 0)
    coef[diag <= 0, :] = 0.0
    half = lam / 2.0

    active = np.arange(width)
    converged = np.zeros(width, dtype=bool)
    sweeps = 0
    while active.size and sweeps < max_sweeps:
        sweeps += 1
        b = coef[:, active]
        h = half[active]
        grad = c[:, active] - g @ b
        biggest = np.zeros(active.size)
        for m in usable:
            old = b[m].copy()
            rho = grad[m] + diag[m] * old
            new = np.sign(rho) * np.maximum(np.abs(rho) - h, 0.0) / diag[m]
            step = new - old
            if np.any(step):
                b[m] = new
                grad -= np.outer(g[:, m], step)
                np.maximum(biggest, np.abs(step), out=biggest)
        coef[:, active] = b
        done = biggest <= tol * (1.0 + np.max(np.abs(b), axis=0))
        converged[active[done]] = True
        active = active[~done]

    return DescentResult(coef, converged, sweeps)


def lasso_gram(gram: npt.ArrayLike, cross: npt.ArrayLike, lambdas: npt.ArrayLike,
               start: npt.ArrayLike | None = None, tol: float = _DEFAULTS.lasso_tol,
               max_sweeps: int = _DEFAULTS.lasso_max_sweeps) -> Matrix:
    """Like descend, but every column must converge.

    Raises:
        NoConvergence: If any column hits the sweep cap.
    """
    result = descend(gram, cross, lambdas, start=start, tol=tol, max_sweeps=max_sweeps)
    if not np.all(result.converged):
        stuck = np.flatnonzero(~result.converged)
        raise NoConvergence(
            f"Lasso coordinate descent hit {max_sweeps} sweeps on columns {stuck.tolist()}\n"
            "Raise lasso_max_sweeps or loosen lasso_tol."
        )
    logger.debug(f"Lasso converged on {result.coef.shape[1]} columns in {result.sweeps} sweeps")
    return result.coef


def lasso_column(prob: LassoProblem, tol: float = _DEFAULTS.lasso_tol,
                 max_sweeps: int = _DEFAULTS.lasso_max_sweeps) -> npt.NDArray[np.float64]:
    """Solve a single lasso column.

    Returns:
        q-vector of coefficients.

    Raises:
        NoConvergence: If the sweep cap is reached.
    """
    design = as_matrix(prob.design)
    target = np.asarray(prob.target_column, dtype=np.float64).ravel()
    if target.shape[0] != design.shape[0]:
        raise ShapeMismatch(f"Design has {design.shape[0]} rows, target has {target.shape[0]}")
    if prob.lam < 0:
        raise ValueError(f"Lasso penalty must be non-negative, got {prob.lam}")
    coef = lasso_gram(design.T @ design, design.T @ target, prob.lam, tol=tol,
                      max_sweeps=max_sweeps)
    return coef[:, 0]


def _column_lambdas(lambdas: npt.ArrayLike, count: int, what: str) -> npt.NDArray[np.float64]:
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.ndim == 0:
        lam = np.full(count, float(lam))
    if lam.shape != (count,):
        raise ShapeMismatch(f"Expected {count} {what} penalties, got shape {lam.shape}")
    return lam


def eta_lasso(data: Dataset, lambdas: npt.ArrayLike, tol: float = _DEFAULTS.lasso_tol,
              max_sweeps: int = _DEFAULTS.lasso_max_sweeps) -> Matrix:
    """Inverse-regression lasso: column j of X on Y with penalty lambdas[j].

    Args:
        data: Centred dataset.
        lambdas: p-vector (or scalar) of penalties.

    Returns:
        q x p coefficient matrix eta_hat.
    """
    lam = _column_lambdas(lambdas, data.p, "predictor")
    y = data.y_centered
    return lasso_gram(y.T @ y, y.T @ data.x_centered, lam, tol=tol, max_sweeps=max_sweeps)


def lasso_forward(data: Dataset, lambdas: npt.ArrayLike, tol: float = _DEFAULTS.lasso_tol,
                  max_sweeps: int = _DEFAULTS.lasso_max_sweeps) -> Matrix:
    """q separate lassos of each response column on X.

    Returns:
        p x q coefficient matrix.
    """
    lam = _column_lambdas(lambdas, data.q, "response")
    x = data.x_centered
    return lasso_gram(x.T @ x, x.T @ data.y_centered, lam, tol=tol, max_sweeps=max_sweeps)


# =============================================================================
# PRECISION MATRICES
# =============================================================================


def sample_covariance(z: npt.ArrayLike) -> Matrix:
    """Z'Z / n for rows that are already centred."""
    arr = as_matrix(z)
    return symmetrize(arr.T @ arr / arr.shape[0])


def glasso(prob: PrecisionProblem, tol: float = _DEFAULTS.glasso_tol,
           max_iter: int = _DEFAULTS.glasso_max_iter) -> Matrix:
    """L1 off-diagonal penalized precision estimate.

    Minimizes tr(Omega S) - log det Omega + gamma * sum_{j != k} |omega_jk|
    with scikit-learn's blockwise coordinate descent. Two cases are exact and
    skip the solver: gamma = 0 returns S^-1, and gamma at or above every
    absolute off-diagonal entry of S returns diag(1 / s_jj).

    Args:
        prob: Problem with penalty_kind ``l1-offdiag``.
        tol: Dual-gap tolerance.
        max_iter: Outer iteration cap.

    Returns:
        Symmetric positive definite precision estimate.

    Raises:
        BadGamma: If gamma < 0.
        SingularInput: If gamma = 0 and S is singular, or S has a zero variance.
        NoConvergence: If the solver does not reach tol.
    """
    if prob.penalty_kind != "l1-offdiag":
        raise ValueError(f"glasso solves l1-offdiag problems, got {prob.penalty_kind}")
    gamma = float(prob.gamma)
    if gamma < 0 or not np.isfinite(gamma):
        raise BadGamma(f"Graphical lasso penalty must be finite and non-negative, got {gamma}")
    s = symmetrize(prob.s)

    if gamma == 0.0:
        try:
            return spd_inverse(s)
        except NotPositiveDefinite as e:
            raise SingularInput(
                "Unpenalized precision fit needs a nonsingular covariance\n"
                "Use a positive gamma or ridge_precision."
            ) from e

    variances = np.diag(s)
    if np.any(variances <= 0):
        zero = int(np.sum(variances <= 0))
        raise SingularInput(f"Covariance has {zero} zero-variance coordinates")
    off = s - np.diag(variances)
    if np.max(np.abs(off)) <= gamma:
        return np.diag(1.0 / variances)

    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        try:
            _, precision = graphical_lasso(s, alpha=gamma, tol=tol, enet_tol=tol,
                                           max_iter=max_iter)
        except (ConvergenceWarning, FloatingPointError) as e:
            raise NoConvergence(f"Graphical lasso failed at gamma={gamma:.3g}: {e}") from e

    omega = symmetrize(precision)
    try:
        log_det_spd(omega)
    except NotPositiveDefinite as e:
        raise NoConvergence(
            f"Graphical lasso returned an indefinite matrix at gamma={gamma:.3g}"
        ) from e
    return omega


def ridge_precision(prob: PrecisionProblem) -> Matrix:
    """L2 penalized precision estimate in closed form.

    With S = V diag(d) V', the minimizer of
    tr(Omega S) - log det Omega + gamma * sum_{j,k} omega_jk^2 is V diag(theta) V'
    where theta_j is the positive root of 2 gamma theta^2 + d_j theta - 1 = 0.

    Raises:
        BadGamma: If gamma <= 0.
    """
    if prob.penalty_kind != "l2-all":
        raise ValueError(f"ridge_precision solves l2-all problems, got {prob.penalty_kind}")
    gamma = float(prob.gamma)
    if not gamma > 0 or not np.isfinite(gamma):
        raise BadGamma(f"Ridge precision penalty must be positive, got {gamma}")
    d, v = sym_eigen(prob.s)
    # 2 / (d + sqrt(d^2 + 8 gamma)) is the same root without cancellation
    theta = 2.0 / (d + np.sqrt(d * d + 8.0 * gamma))
    omega = (v * theta) @ v.T
    return (omega + omega.T) / 2.0


# =============================================================================
# LEAST SQUARES
# =============================================================================


def _response_lambdas(mode: RidgeMode, lambdas: float | Sequence[float] | npt.ArrayLike,
                      q: int) -> npt.NDArray[np.float64]:
    lam = np.asarray(lambdas, dtype=np.float64)
    if mode == "single":
        if lam.size != 1:
            raise ShapeMismatch(f"Single-lambda ridge takes one penalty, got {lam.size}")
        lam = np.full(q, float(lam.ravel()[0]))
    elif mode == "per-response":
        lam = _column_lambdas(lam, q, "response")
    else:
        raise ValueError(f"Unknown ridge mode {mode!r}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError(f"Ridge penalties must be finite and non-negative, got {lam}")
    return lam


def ridge_from_svd(u: Matrix, sv: npt.NDArray[np.float64], vt: Matrix, y: Matrix,
                   lam: npt.NDArray[np.float64]) -> Matrix:
    """Ridge coefficients from the thin SVD X = U diag(sv) Vt, one penalty per response."""
    shrink = sv[:, None] / (sv[:, None] ** 2 + lam[None, :])
    return np.asarray(vt.T @ (shrink * (u.T @ y)))


def ridge_ls(data: Dataset, mode: RidgeMode,
             lambdas: float | Sequence[float] | npt.ArrayLike) -> Matrix:
    """Ridge regression of each response on X.

    Column m solves (X'X + lambda_m I) b_m = X'y_m; ``single`` mode shares one
    lambda across responses.

    Raises:
        Singular: If some lambda is 0 and X'X is singular.
    """
    x, y = data.x_centered, data.y_centered
    lam = _response_lambdas(mode, lambdas, data.q)
    if np.any(lam == 0) and numerical_rank(x) < data.p:
        raise Singular("Ridge with lambda=0 needs a full-column-rank design")
    u, sv, vt = linalg.svd(x, full_matrices=False)
    return ridge_from_svd(u, sv, vt, y, lam)


def ols(data: Dataset) -> Matrix:
    """Least squares when X has full column rank, otherwise the Moore-Penrose solution X^+ Y."""
    x, y = data.x_centered, data.y_centered
    if numerical_rank(x) == data.p:
        coef, *_ = linalg.lstsq(x, y, check_finite=False)
        return np.asarray(coef)
    logger.debug(f"Design has rank below p={data.p}, using the pseudo-inverse")
    return pseudo_inverse(x) @ y


# =============================================================================
# DIAGNOSTICS
# =============================================================================


def _as_columns(a: npt.ArrayLike) -> Matrix:
    arr = np.asarray(a, dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


def lasso_objective(design: npt.ArrayLike, targets: npt.ArrayLike, coef: npt.ArrayLike,
                    lambdas: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Per-column value of ||t - D b||^2 + lambda * ||b||_1."""
    d = as_matrix(design)
    t = _as_columns(targets)
    b = _as_columns(coef)
    resid = t - d @ b
    lam = np.broadcast_to(np.asarray(lambdas, dtype=np.float64), (b.shape[1],))
    return np.asarray(np.sum(resid**2, axis=0) + lam * np.sum(np.abs(b), axis=0))


def lasso_kkt_residual(design: npt.ArrayLike, targets: npt.ArrayLike, coef: npt.ArrayLike,
                       lambdas: npt.ArrayLike) -> float:
    """Largest violation of the lasso subgradient conditions.

    With g = 2 D'(t - D b): |g_m| <= lambda where b_m = 0 and
    g_m = lambda * sign(b_m) elsewhere.
    """
    d = as_matrix(design)
    t = _as_columns(targets)
    b = _as_columns(coef)
    lam = np.broadcast_to(np.asarray(lambdas, dtype=np.float64), (b.shape[1],))[None, :]
    grad = 2.0 * d.T @ (t - d @ b)
    zero = b == 0
    violation = np.where(
        zero, np.maximum(np.abs(grad) - lam, 0.0), np.abs(grad - lam * np.sign(b))
    )
    return float(np.max(violation))


def precision_objective(omega: npt.ArrayLike, s: npt.ArrayLike, gamma: float,
                        kind: PenaltyKind) -> float:
    """tr(Omega S) - log det Omega + gamma * penalty(Omega)."""
    om = symmetrize(omega)
    sm = symmetrize(s)
    if kind == "l1-offdiag":
        penalty = float(np.sum(np.abs(om)) - np.sum(np.abs(np.diag(om))))
    else:
        penalty = float(np.sum(om**2))
    return float(np.sum(om * sm)) - log_det_spd(om) + gamma * penalty


def glasso_kkt_residual(omega: npt.ArrayLike, s: npt.ArrayLike, gamma: float) -> float:
    """Largest violation of the graphical-lasso stationarity conditions on G = S - Omega^-1."""
    om = symmetrize(omega)
    grad = symmetrize(s) - spd_inverse(om)
    off = ~np.eye(om.shape[0], dtype=bool)
    zero = om == 0
    violation = np.where(
        zero, np.maximum(np.abs(grad) - gamma, 0.0), np.abs(grad + gamma * np.sign(om))
    )
    diag_violation = np.abs(np.diag(grad))
    off_violation = violation[off]
    worst_off = float(np.max(off_violation)) if off_violation.size else 0.0
    return max(worst_off, float(np.max(diag_violation)))


def ridge_precision_residual(omega: npt.ArrayLike, s: npt.ArrayLike, gamma: float) -> float:
    """Frobenius norm of S - Omega^-1 + 2 gamma Omega."""
    om = symmetrize(omega)
    resid = symmetrize(s) - spd_inverse(om) + 2.0 * gamma * om
    return float(np.linalg.norm(resid, "fro"))
