"""Normal-likelihood reduced-rank regression in closed form.

For a design D (n x a) and response R (n x b), the rank-r minimizer of

    n^-1 tr{(R - D C)' (R - D C) Omega} - log det Omega

is C_r = B W^-1 V_r V_r' W, where B is the least-squares coefficient, W is the
inverse square root of the least-squares residual covariance and V_r holds the
top r eigenvectors of W (R' D B) W. The optimal Omega is the inverse of the
rank-r residual covariance. The inverse orientation regresses X on Y; the
forward orientation regresses Y on X.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from invreg.errors import NotPositiveDefinite, RankTooLarge, ShapeMismatch, Singular
from invreg.matlin import (
    Matrix,
    as_matrix,
    log_det_spd,
    spd_inverse,
    spd_solve,
    spd_sqrt,
    sym_eigen,
    symmetrize,
)
from invreg.simgen import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RrrFit:
    """Reduced-rank fit at one rank.

    Attributes:
        coef: a x b coefficient matrix of rank `rank`.
        precision: b x b jointly optimal error precision.
        rank: Constraint rank r.
        objective: Likelihood objective at (coef, precision).
    """

    coef: Matrix
    precision: Matrix
    rank: int
    objective: float


def rrr_objective(design: npt.ArrayLike, response: npt.ArrayLike, coef: npt.ArrayLike,
                  precision: npt.ArrayLike) -> float:
    """n^-1 tr{(R - D C)' (R - D C) Omega} - log det Omega."""
    d = as_matrix(design)
    r = as_matrix(response)
    resid = r - d @ np.asarray(coef, dtype=np.float64)
    omega = symmetrize(precision)
    return float(np.sum((resid.T @ resid) * omega) / d.shape[0]) - log_det_spd(omega)


def _check_inputs(design: npt.ArrayLike, response: npt.ArrayLike) -> tuple[Matrix, Matrix]:
    d = as_matrix(design)
    r = as_matrix(response)
    if d.shape[0] != r.shape[0]:
        raise ShapeMismatch(f"Design has {d.shape[0]} rows but response has {r.shape[0]}")
    return d, r


def rrr_path(design: npt.ArrayLike, response: npt.ArrayLike,
             ranks: Iterable[int] | None = None) -> list[RrrFit]:
    """Reduced-rank fits at several ranks from one eigendecomposition.

    Args:
        design: n x a design matrix.
        response: n x b response matrix.
        ranks: Ranks to fit; defaults to 0..min(a, b).

    Returns:
        One RrrFit per requested rank, in the requested order.

    Raises:
        RankTooLarge: If a rank is negative or exceeds min(a, b).
        Singular: If D'D or the least-squares residual covariance is singular.
    """
    d, r = _check_inputs(design, response)
    n, a = d.shape
    b = r.shape[1]
    limit = min(a, b)
    wanted = list(range(limit + 1)) if ranks is None else [int(k) for k in ranks]
    for k in wanted:
        if k < 0 or k > limit:
            raise RankTooLarge(f"Rank must lie in [0, {limit}], got {k}")

    try:
        b_ols = spd_solve(d.T @ d, d.T @ r)
    except NotPositiveDefinite as e:
        raise Singular(f"Design Gram matrix ({a}x{a}, n={n}) is singular") from e
    resid = r - d @ b_ols
    try:
        root = spd_sqrt(resid.T @ resid / n)
        w = spd_inverse(root)
    except NotPositiveDefinite as e:
        raise Singular(
            f"Least-squares residual covariance ({b}x{b}, n={n}) is singular\n"
            "Reduced-rank regression needs n comfortably above the number of columns."
        ) from e

    fitted = symmetrize(w @ (r.T @ d @ b_ols) @ w)
    _, vectors = sym_eigen(fitted)
    base = b_ols @ root

    fits: list[RrrFit] = []
    for k in wanted:
        v = vectors[:, :k]
        coef = base @ v @ v.T @ w
        resid_k = r - d @ coef
        cov_k = symmetrize(resid_k.T @ resid_k / n)
        precision = spd_inverse(cov_k)
        objective = float(b) + log_det_spd(cov_k)
        fits.append(RrrFit(coef=coef, precision=precision, rank=k, objective=objective))
    logger.debug(f"Reduced-rank path over ranks {wanted} (n={n}, a={a}, b={b})")
    return fits


def rrr_fit(design: npt.ArrayLike, response: npt.ArrayLike, r: int) -> RrrFit:
    """Reduced-rank fit at a single rank r (see rrr_path for errors)."""
    return rrr_path(design, response, [r])[0]


def rrr_inverse(data: Dataset, r: int) -> RrrFit:
    """Rank-r inverse regression of X on Y; coef is eta_hat (q x p), precision is Delta^-1."""
    return rrr_fit(data.y_centered, data.x_centered, r)


def rrr_forward(data: Dataset, r: int) -> RrrFit:
    """Rank-r forward regression of Y on X; coef is beta_hat (p x q), precision is Sigma_E^-1."""
    return rrr_fit(data.x_centered, data.y_centered, r)
