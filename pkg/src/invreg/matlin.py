"""Dense linear-algebra contracts used by every estimator.

Matrices are plain float64 numpy arrays. Functions that take a SymPosDef
validate it with the Cholesky pivot rule: a matrix is positive definite when
every pivot exceeds dim * machine-epsilon * max-diagonal.

Module structure:
- validation: as_matrix, symmetrize, as_spd
- factorizations: cholesky, sym_eigen
- inverses and roots: spd_inverse, spd_solve, pseudo_inverse, spd_sqrt, log_det_spd
- joint covariance algebra: JointCovariance, partitioned_precision, assemble_forward
- measures: norms, numerical_rank
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt
from scipy import linalg

from invreg.errors import NonSymmetric, NoConvergence, NotPositiveDefinite, ShapeMismatch

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]

# Largest asymmetry, relative to the largest entry, that symmetrize averages
# away as rounding. Anything above it raises NonSymmetric.
ROUNDOFF_ASYMMETRY_LIMIT = 1e-8
RANK_TOL = 1e-8
_EPS = float(np.finfo(np.float64).eps)


class EigenDecomposition(NamedTuple):
    """Eigenvalues in descending order and matching orthonormal eigenvectors (columns)."""
    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: Matrix


class Norms(NamedTuple):
    """Frobenius and spectral norm of a matrix."""
    frobenius: float
    spectral: float


class PartitionedPrecision(NamedTuple):
    """Inverse-regression and forward-regression parameters of a joint covariance."""
    delta_inv: Matrix
    eta: Matrix
    sigma_e_inv: Matrix
    beta: Matrix


# =============================================================================
# VALIDATION
# =============================================================================


def as_matrix(a: npt.ArrayLike) -> Matrix:
    """Coerce to a finite 2-D float64 array with at least one row and column.

    Raises:
        ShapeMismatch: If the input is not 2-D or is empty.
        ValueError: If any entry is not finite.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"Expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("Matrix has non-finite entries")
    return arr


def symmetrize(a: npt.ArrayLike) -> Matrix:
    """Average away rounding asymmetry: return (A + A')/2.

    This repairs matrices that are symmetric in exact arithmetic; it is not a
    strict symmetry check. Asymmetry up to ROUNDOFF_ASYMMETRY_LIMIT relative is
    removed silently.

    Raises:
        NonSymmetric: If A is not square or its asymmetry exceeds
            ROUNDOFF_ASYMMETRY_LIMIT relative.
    """
    arr = as_matrix(a)
    if arr.shape[0] != arr.shape[1]:
        raise NonSymmetric(f"Symmetric matrix must be square, got shape {arr.shape}")
    scale = max(float(np.max(np.abs(arr))), 1.0)
    asym = float(np.max(np.abs(arr - arr.T)))
    limit = ROUNDOFF_ASYMMETRY_LIMIT * scale
    if asym > limit:
        raise NonSymmetric(f"Matrix asymmetry {asym:.3e} exceeds rounding limit {limit:.3e}")
    return (arr + arr.T) / 2.0


def cholesky(a: npt.ArrayLike) -> Matrix:
    """Lower-triangular L with L L' = a.

    Args:
        a: Symmetric positive definite matrix.

    Returns:
        Lower Cholesky factor with positive diagonal.

    Raises:
        NotPositiveDefinite: If a pivot is at or below dim * eps * max-diagonal.
    """
    sym = symmetrize(a)
    dim = sym.shape[0]
    threshold = dim * _EPS * max(float(np.max(np.diag(sym))), 0.0)
    try:
        factor = linalg.cholesky(sym, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Cholesky failed on {dim}x{dim} matrix: {e}") from e
    pivots = np.diag(factor) ** 2
    if np.any(pivots <= threshold):
        worst = int(np.argmin(pivots))
        raise NotPositiveDefinite(
            f"Cholesky pivot {worst} is {pivots[worst]:.3e}, at or below {threshold:.3e}"
        )
    return np.asarray(factor)


def as_spd(a: npt.ArrayLike) -> Matrix:
    """Validate and symmetrize a matrix declared positive definite."""
    sym = symmetrize(a)
    cholesky(sym)
    return sym


# =============================================================================
# FACTORIZATIONS, INVERSES AND ROOTS
# =============================================================================


def sym_eigen(a: npt.ArrayLike) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Each eigenvector is signed so its first non-negligible coordinate is
    positive, which makes the output deterministic across platforms.

    Raises:
        NonSymmetric: If a is not symmetric.
        NoConvergence: If the LAPACK driver fails to converge.
    """
    sym = symmetrize(a)
    try:
        values, vectors = linalg.eigh(sym, check_finite=False)
    except linalg.LinAlgError as e:
        raise NoConvergence(f"Symmetric eigensolver did not converge: {e}") from e
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        lead = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if lead.size and col[lead[0]] < 0:
            vectors[:, k] = -col
    return EigenDecomposition(values, vectors)


def spd_solve(a: npt.ArrayLike, b: npt.ArrayLike) -> Matrix:
    """Solve a X = b for positive definite a via its Cholesky factor."""
    sym = symmetrize(a)
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape[0] != sym.shape[0]:
        raise ShapeMismatch(f"Cannot solve {sym.shape} system with right-hand side {rhs.shape}")
    factor = cholesky(sym)
    return np.asarray(linalg.cho_solve((factor, True), rhs, check_finite=False))


def spd_inverse(a: npt.ArrayLike) -> Matrix:
    """Inverse of a positive definite matrix, returned exactly symmetric."""
    sym = symmetrize(a)
    inv = spd_solve(sym, np.eye(sym.shape[0]))
    return (inv + inv.T) / 2.0


def pseudo_inverse(a: npt.ArrayLike) -> Matrix:
    """Moore-Penrose inverse via the SVD (total: the zero matrix maps to zero)."""
    arr = as_matrix(a)
    return np.asarray(linalg.pinv(arr, check_finite=False))


def spd_sqrt(a: npt.ArrayLike) -> Matrix:
    """Symmetric positive definite square root."""
    sym = as_spd(a)
    values, vectors = sym_eigen(sym)
    root = (vectors * np.sqrt(values)) @ vectors.T
    return (root + root.T) / 2.0


def log_det_spd(a: npt.ArrayLike) -> float:
    """log det of a positive definite matrix from its Cholesky factor."""
    factor = cholesky(a)
    return float(2.0 * np.sum(np.log(np.diag(factor))))


# =============================================================================
# JOINT COVARIANCE ALGEBRA
# =============================================================================


@dataclass(frozen=True)
class JointCovariance:
    """Covariance of (X', Y')' with the X block first.

    Attributes:
        p: Number of predictors.
        q: Number of responses.
        sigma: (p+q) x (p+q) positive definite covariance.
    """

    p: int
    q: int
    sigma: Matrix

    def __post_init__(self) -> None:
        sigma = as_spd(self.sigma)
        if sigma.shape != (self.p + self.q, self.p + self.q):
            raise ShapeMismatch(
                f"Joint covariance must be {self.p + self.q}x{self.p + self.q}, got {sigma.shape}"
            )
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        sxx, _, syy = self.blocks()
        cholesky(sxx)
        cholesky(syy)

    def blocks(self) -> tuple[Matrix, Matrix, Matrix]:
        """Return (Sigma_XX, Sigma_XY, Sigma_YY)."""
        p = self.p
        return self.sigma[:p, :p], self.sigma[:p, p:], self.sigma[p:, p:]


def partitioned_precision(jc: JointCovariance) -> PartitionedPrecision:
    """Inverse- and forward-regression parameters from a joint covariance.

    Delta = Sigma_XX - Sigma_XY Sigma_YY^-1 Sigma_XY' and
    Sigma_E = Sigma_YY - Sigma_XY' Sigma_XX^-1 Sigma_XY are the two Schur
    complements; eta = Sigma_YY^-1 Sigma_XY' and beta = Sigma_XX^-1 Sigma_XY.

    Raises:
        NotPositiveDefinite: If a Schur complement fails Cholesky.
    """
    sxx, sxy, syy = jc.blocks()
    eta = spd_solve(syy, sxy.T)
    beta = spd_solve(sxx, sxy)
    delta = symmetrize(sxx - sxy @ eta)
    sigma_e = symmetrize(syy - sxy.T @ beta)
    return PartitionedPrecision(
        delta_inv=spd_inverse(delta),
        eta=eta,
        sigma_e_inv=spd_inverse(sigma_e),
        beta=beta,
    )


def assemble_forward(delta_inv: npt.ArrayLike, eta: npt.ArrayLike,
                     sigma_yy_inv: npt.ArrayLike) -> Matrix:
    """Forward coefficients Delta^-1 eta' (Sigma_YY^-1 + eta Delta^-1 eta')^-1.

    The q x q middle matrix is a positive definite plus a positive
    semidefinite term and is never inverted explicitly.

    Args:
        delta_inv: p x p positive definite inverse-regression error precision.
        eta: q x p inverse-regression coefficients.
        sigma_yy_inv: q x q positive definite response precision.

    Returns:
        p x q forward coefficient matrix.

    Raises:
        ShapeMismatch: If the operand shapes disagree.
        NotPositiveDefinite: If a precision is not positive definite.
    """
    eta_m = np.asarray(eta, dtype=np.float64)
    d_inv = symmetrize(delta_inv)
    y_inv = symmetrize(sigma_yy_inv)
    q, p = eta_m.shape
    if d_inv.shape != (p, p) or y_inv.shape != (q, q):
        raise ShapeMismatch(
            f"eta is {q}x{p} but Delta^-1 is {d_inv.shape} and Sigma_YY^-1 is {y_inv.shape}"
        )
    cholesky(d_inv)
    eta_dinv = eta_m @ d_inv
    middle = symmetrize(y_inv + eta_dinv @ eta_m.T)
    return spd_solve(middle, eta_dinv).T


# =============================================================================
# MEASURES
# =============================================================================


def norms(a: npt.ArrayLike) -> Norms:
    """Frobenius norm and spectral norm (largest singular value)."""
    arr = as_matrix(a)
    return Norms(
        frobenius=float(np.linalg.norm(arr, "fro")),
        spectral=float(np.linalg.norm(arr, 2)),
    )


def numerical_rank(a: npt.ArrayLike, rel_tol: float = RANK_TOL) -> int:
    """Count singular values above rel_tol times the largest one (0 for a zero matrix)."""
    arr = as_matrix(a)
    singular = linalg.svdvals(arr, check_finite=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > rel_tol * singular[0]))
