"""Seeded data-generating models and the ground truth needed to score estimates.

Three designs are supported:
- sparse inverse model: Y ~ N(0, AR1(rho_y)), X | Y ~ N(eta' y, AR1(rho_delta)),
  eta = Z * A with Bernoulli(s_star) mask A
- reduced-rank inverse model: same, with eta = P Q of rank r_star
- reduced-rank forward model: X ~ N(0, AR1(rho_x)), Y | X ~ N(beta' x, AR1(rho_e)),
  beta = Z Q with Q ~ Uniform(-1/4, 1/4)

Randomness comes from numpy's counter-based Philox generator. A replication
seed is base_seed XOR replication-index; within a replication, independent
streams (truth, data, folds, split) are spawned from the same seed, so
replications can run in any order or process and still reproduce.
"""

import logging
from dataclasses import dataclass
from typing import ClassVar, Literal, Union

import numpy as np
import numpy.typing as npt

from invreg.errors import BadRho, RankTooLarge, ShapeMismatch
from invreg.matlin import (
    JointCovariance,
    Matrix,
    as_matrix,
    as_spd,
    cholesky,
    spd_inverse,
    spd_solve,
    symmetrize,
)

logger = logging.getLogger(__name__)

Orientation = Literal["inverse", "forward"]

STREAM_TRUTH = 0
STREAM_DATA = 1
STREAM_FOLDS = 2
STREAM_SPLIT = 3

SAMPLER_METADATA = {
    "bit_generator": "numpy.random.Philox",
    "seeding": "SeedSequence(base_seed XOR replication, spawn_key=(stream,))",
    "normal_method": "numpy.random.Generator.standard_normal (ziggurat)",
    "mvn_method": "standard normals times the lower Cholesky factor",
}

_SEED_MASK = (1 << 64) - 1


def replication_seed(base_seed: int, index: int) -> int:
    """Per-replication seed: base_seed XOR index, reduced to 64 bits."""
    return (int(base_seed) ^ int(index)) & _SEED_MASK


def make_rng(seed: int, stream: int = STREAM_DATA) -> np.random.Generator:
    """Philox generator for one named stream of one seed."""
    seq = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


# =============================================================================
# MODEL SPECS
# =============================================================================


@dataclass(frozen=True)
class Ar1Spec:
    """AR(1) correlation matrix with entry (i, j) = rho ** |i - j|."""
    dim: int
    rho: float


@dataclass(frozen=True)
class SparseInverseModelSpec:
    """Inverse-regression design with an elementwise-sparse eta."""
    n: int
    p: int
    q: int
    rho_y: float
    rho_delta: float
    s_star: float
    seed: int

    design: ClassVar[str] = "sparse-inverse"


@dataclass(frozen=True)
class ReducedRankInverseModelSpec:
    """Inverse-regression design with eta of rank r_star."""
    n: int
    p: int
    q: int
    rho_y: float
    rho_delta: float
    r_star: int
    seed: int

    design: ClassVar[str] = "rr-inverse"


@dataclass(frozen=True)
class ReducedRankForwardModelSpec:
    """Forward-regression design with beta of rank r_star."""
    n: int
    p: int
    q: int
    rho_x: float
    rho_e: float
    r_star: int
    seed: int

    design: ClassVar[str] = "rr-forward"


ModelSpec = Union[SparseInverseModelSpec, ReducedRankInverseModelSpec, ReducedRankForwardModelSpec]


# =============================================================================
# GROUND TRUTH AND DATASETS
# =============================================================================


@dataclass(frozen=True)
class JointGroundTruth:
    """True generative parameters of a joint Normal (X, Y) with mean zero.

    Attributes:
        eta_star: q x p inverse-regression coefficients.
        delta_star: p x p inverse-regression error covariance.
        sigma_yy_star: q x q response covariance.
        beta_star: p x q forward-regression coefficients.
        sigma_xx_star: p x p predictor covariance.
        sigma_e_star: q x q forward-regression error covariance.
    """

    eta_star: Matrix
    delta_star: Matrix
    sigma_yy_star: Matrix
    beta_star: Matrix
    sigma_xx_star: Matrix
    sigma_e_star: Matrix

    @property
    def p(self) -> int:
        return int(self.beta_star.shape[0])

    @property
    def q(self) -> int:
        return int(self.beta_star.shape[1])

    @classmethod
    def from_inverse(cls, eta: Matrix, delta: Matrix, sigma_yy: Matrix) -> "JointGroundTruth":
        """Truth of the inverse model Y ~ N(0, Sigma_YY), X | Y ~ N(eta' y, Delta)."""
        eta = as_matrix(eta)
        delta = as_spd(delta)
        sigma_yy = as_spd(sigma_yy)
        sigma_xy = eta.T @ sigma_yy
        sigma_xx = symmetrize(delta + sigma_xy @ eta)
        beta = spd_solve(sigma_xx, sigma_xy)
        sigma_e = symmetrize(sigma_yy - sigma_xy.T @ beta)
        return cls(eta, delta, sigma_yy, beta, sigma_xx, sigma_e)

    @classmethod
    def from_forward(cls, beta: Matrix, sigma_xx: Matrix, sigma_e: Matrix) -> "JointGroundTruth":
        """Truth of the forward model X ~ N(0, Sigma_XX), Y | X ~ N(beta' x, Sigma_E)."""
        beta = as_matrix(beta)
        sigma_xx = as_spd(sigma_xx)
        sigma_e = as_spd(sigma_e)
        sigma_xy = sigma_xx @ beta
        sigma_yy = symmetrize(sigma_e + beta.T @ sigma_xy)
        eta = spd_solve(sigma_yy, sigma_xy.T)
        delta = symmetrize(sigma_xx - sigma_xy @ eta)
        return cls(eta, delta, sigma_yy, beta, sigma_xx, sigma_e)

    @property
    def delta_inv_star(self) -> Matrix:
        return spd_inverse(self.delta_star)

    @property
    def sigma_yy_inv_star(self) -> Matrix:
        return spd_inverse(self.sigma_yy_star)

    def joint_covariance(self) -> JointCovariance:
        """Sigma* partitioned with the X block first."""
        sigma_xy = self.eta_star.T @ self.sigma_yy_star
        top = np.hstack([self.sigma_xx_star, sigma_xy])
        bottom = np.hstack([sigma_xy.T, self.sigma_yy_star])
        return JointCovariance(p=self.p, q=self.q, sigma=np.vstack([top, bottom]))


@dataclass(frozen=True)
class Dataset:
    """Column-centred predictors and responses with the removed means.

    Attributes:
        x_centered: n x p centred predictor matrix.
        y_centered: n x q centred response matrix.
        x_mean: Column means removed from the raw predictors.
        y_mean: Column means removed from the raw responses.
    """

    x_centered: Matrix
    y_centered: Matrix
    x_mean: npt.NDArray[np.float64]
    y_mean: npt.NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.x_centered.shape[0])

    @property
    def p(self) -> int:
        return int(self.x_centered.shape[1])

    @property
    def q(self) -> int:
        return int(self.y_centered.shape[1])


def center(raw_x: npt.ArrayLike, raw_y: npt.ArrayLike) -> Dataset:
    """Remove column means from predictors and responses and keep them.

    Args:
        raw_x: n x p predictor matrix.
        raw_y: n x q response matrix.

    Returns:
        Dataset with centred blocks and stored means.

    Raises:
        ShapeMismatch: If row counts differ or are below 2.
    """
    x = as_matrix(raw_x)
    y = as_matrix(raw_y)
    if x.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"Predictors have {x.shape[0]} rows but responses have {y.shape[0]}")
    if x.shape[0] < 2:
        raise ShapeMismatch(f"Centering needs at least 2 rows, got {x.shape[0]}")
    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = x - x_mean
    yc = y - y_mean
    for arr in (xc, yc, x_mean, y_mean):
        arr.setflags(write=False)
    return Dataset(xc, yc, x_mean, y_mean)


# =============================================================================
# GENERATORS
# =============================================================================


def ar1(spec: Ar1Spec) -> Matrix:
    """AR(1) correlation matrix.

    Raises:
        BadRho: If |rho| >= 1.
    """
    if not abs(spec.rho) < 1.0:
        raise BadRho(f"AR(1) rho must lie in (-1, 1), got {spec.rho}")
    lags = np.abs(np.subtract.outer(np.arange(spec.dim), np.arange(spec.dim)))
    return np.power(float(spec.rho), lags).astype(np.float64)


def sample_mvn(cov: npt.ArrayLike, n: int, seed: int | np.random.Generator) -> Matrix:
    """n i.i.d. rows from N(0, cov).

    Args:
        cov: Positive definite covariance.
        n: Number of rows (>= 1).
        seed: Integer seed (data stream) or an existing Generator.

    Returns:
        n x dim sample matrix.
    """
    if n < 1:
        raise ValueError(f"Sample size must be at least 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, STREAM_DATA)
    factor = cholesky(cov)
    z = rng.standard_normal((n, factor.shape[0]))
    return z @ factor.T


def _check_spec(spec: ModelSpec) -> None:
    if min(spec.n, spec.p, spec.q) < 1:
        raise ValueError(f"n, p and q must be positive, got n={spec.n}, p={spec.p}, q={spec.q}")
    if isinstance(spec, SparseInverseModelSpec):
        if not 0.0 < spec.s_star <= 1.0:
            raise ValueError(f"s_star must lie in (0, 1], got {spec.s_star}")
    elif spec.r_star > min(spec.p, spec.q) or spec.r_star < 0:
        raise RankTooLarge(f"r_star must lie in [0, {min(spec.p, spec.q)}], got {spec.r_star}")


def draw_truth(spec: ModelSpec, rng: np.random.Generator) -> JointGroundTruth:
    """Draw the random true parameters of a design.

    Args:
        spec: One of the three model specs.
        rng: Generator for the truth stream.

    Returns:
        Ground truth with all six derived matrices.
    """
    _check_spec(spec)
    p, q = spec.p, spec.q
    if isinstance(spec, SparseInverseModelSpec):
        z = rng.standard_normal((q, p))
        mask = rng.random((q, p)) < spec.s_star
        eta = z * mask
        return JointGroundTruth.from_inverse(
            eta, ar1(Ar1Spec(p, spec.rho_delta)), ar1(Ar1Spec(q, spec.rho_y))
        )
    if isinstance(spec, ReducedRankInverseModelSpec):
        left = rng.standard_normal((q, spec.r_star))
        right = rng.standard_normal((spec.r_star, p))
        return JointGroundTruth.from_inverse(
            left @ right, ar1(Ar1Spec(p, spec.rho_delta)), ar1(Ar1Spec(q, spec.rho_y))
        )
    left = rng.standard_normal((p, spec.r_star))
    right = rng.uniform(-0.25, 0.25, size=(spec.r_star, q))
    return JointGroundTruth.from_forward(
        left @ right, ar1(Ar1Spec(p, spec.rho_x)), ar1(Ar1Spec(q, spec.rho_e))
    )


def sample_dataset(truth: JointGroundTruth, n: int, rng: np.random.Generator,
                   orientation: Orientation) -> Dataset:
    """Draw n observations from the truth and centre them.

    The inverse orientation draws Y first and then X | Y; the forward
    orientation draws X first and then Y | X.
    """
    if orientation == "inverse":
        y = sample_mvn(truth.sigma_yy_star, n, rng)
        x = y @ truth.eta_star + sample_mvn(truth.delta_star, n, rng)
    else:
        x = sample_mvn(truth.sigma_xx_star, n, rng)
        y = x @ truth.beta_star + sample_mvn(truth.sigma_e_star, n, rng)
    return center(x, y)


def orientation_of(spec: ModelSpec) -> Orientation:
    return "forward" if isinstance(spec, ReducedRankForwardModelSpec) else "inverse"


def generate(spec: ModelSpec) -> tuple[JointGroundTruth, Dataset]:
    """Draw truth and data for one replication of a design.

    Truth and data use separate streams of spec.seed, so the same seed always
    yields the same truth regardless of n.

    Returns:
        (ground truth, centred dataset).
    """
    truth = draw_truth(spec, make_rng(spec.seed, STREAM_TRUTH))
    data = sample_dataset(truth, spec.n, make_rng(spec.seed, STREAM_DATA), orientation_of(spec))
    logger.debug(f"Generated {spec.design} replication seed={spec.seed} n={spec.n}")
    return truth, data
