"""Cross-validation: fold plans, prediction-error CV and validation-likelihood CV.

Every fold is centred with the means of its training rows, and the same
training means are subtracted from the held-out rows. A grid point whose fit
fails inside a fold scores +inf instead of aborting the sweep. Ties go to the
largest penalty or the smallest rank.
"""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
from sklearn.model_selection import KFold

from invreg.config import DEFAULT_GRID_SPEC, Settings, parse_grid
from invreg.errors import BadK, EstimatorUndefined, InvregError, ShapeMismatch
from invreg.matlin import Matrix, as_matrix, log_det_spd, numerical_rank
from invreg.rrr import rrr_path
from invreg.simgen import STREAM_FOLDS, Dataset, Orientation, make_rng
from invreg.sparse_est import (
    PenaltyKind,
    PrecisionProblem,
    RidgeMode,
    descend,
    glasso,
    ridge_from_svd,
    ridge_precision,
)

logger = logging.getLogger(__name__)

_DEFAULTS = Settings()


# =============================================================================
# GRIDS, SELECTIONS AND FOLD PLANS
# =============================================================================


@dataclass(frozen=True)
class Grid:
    """Ascending, duplicate-free candidate tuning parameters."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("Tuning grid must not be empty")
        if any(v < 0 or not np.isfinite(v) for v in values):
            raise ValueError(f"Tuning grid values must be finite and non-negative, got {values}")
        object.__setattr__(self, "values", tuple(sorted(set(values))))

    @classmethod
    def from_spec(cls, text: str) -> "Grid":
        """Grid from ``log10:a:b:step`` or a comma list."""
        return cls(parse_grid(text))

    def __len__(self) -> int:
        return len(self.values)


def default_grid() -> Grid:
    """{1e-8, 1e-7.5, ..., 1e8}, 33 points."""
    return Grid.from_spec(DEFAULT_GRID_SPEC)


@dataclass(frozen=True)
class Selection:
    """Outcome of one CV sweep.

    Attributes:
        value: Selected grid value (a penalty, or a rank).
        index: Position of the value among the candidates.
        scores: Total CV score of every candidate, in candidate order.
        at_endpoint: True when a unique optimum sits on the first or last candidate.
    """

    value: float
    index: int
    scores: tuple[float, ...]
    at_endpoint: bool


def _select(candidates: Sequence[float], scores: npt.ArrayLike,
            prefer: Literal["largest", "smallest"], what: str) -> Selection:
    """Argmin of the scores; ties go to the largest (or smallest) candidate."""
    totals = np.asarray(scores, dtype=np.float64)
    finite = np.isfinite(totals)
    if not np.any(finite):
        raise EstimatorUndefined(f"Every candidate failed during cross-validation of {what}")
    best = float(np.min(totals[finite]))
    tied = np.flatnonzero(totals == best)
    index = int(tied[-1] if prefer == "largest" else tied[0])

    last = len(candidates) - 1
    at_endpoint = False
    if last > 0 and index in (0, last):
        neighbour = 1 if index == 0 else last - 1
        at_endpoint = bool(totals[neighbour] != best)
    if at_endpoint:
        logger.warning(
            f"Cross-validation of {what} chose the grid endpoint {candidates[index]:.3g}; "
            "the grid may be too narrow"
        )
    return Selection(
        value=float(candidates[index]),
        index=index,
        scores=tuple(float(s) for s in totals),
        at_endpoint=at_endpoint,
    )


@dataclass(frozen=True)
class FoldPlan:
    """Random partition of n rows into k folds.

    Attributes:
        n: Number of rows.
        k: Number of folds.
        assignment: Fold index of each row.
        seed: Seed the plan was drawn from.
    """

    n: int
    k: int
    assignment: npt.NDArray[np.int64]
    seed: int

    def folds(self) -> Iterator[tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]]:
        """Yield (training rows, held-out rows) for each fold in index order."""
        for fold in range(self.k):
            held = np.flatnonzero(self.assignment == fold)
            train = np.flatnonzero(self.assignment != fold)
            yield train, held


def make_folds(n: int, k: int = _DEFAULTS.folds, seed: int = 0) -> FoldPlan:
    """Seeded uniformly random k-fold partition with sizes differing by at most one.

    Raises:
        BadK: If k < 2 or n < k.
    """
    if k < 2 or n < k:
        raise BadK(f"Need 2 <= k <= n for k-fold cross-validation, got k={k}, n={n}")
    state = int(make_rng(seed, STREAM_FOLDS).integers(0, 2**32 - 1))
    assignment = np.empty(n, dtype=np.int64)
    splitter = KFold(n_splits=k, shuffle=True, random_state=state)
    for fold, (_, held) in enumerate(splitter.split(np.zeros((n, 1)))):
        assignment[held] = fold
    assignment.setflags(write=False)
    return FoldPlan(n=n, k=k, assignment=assignment, seed=seed)


def _split_centered(a: Matrix, train: npt.NDArray[np.int64],
                    held: npt.NDArray[np.int64]) -> tuple[Matrix, Matrix]:
    mean = a[train].mean(axis=0)
    return a[train] - mean, a[held] - mean


def _check_rows(plan: FoldPlan, *arrays: Matrix) -> None:
    for arr in arrays:
        if arr.shape[0] != plan.n:
            raise ShapeMismatch(f"Fold plan covers {plan.n} rows but data has {arr.shape[0]}")


# =============================================================================
# PREDICTION-ERROR CV
# =============================================================================


def cv_lasso_lambdas(design: npt.ArrayLike, targets: npt.ArrayLike, grid: Grid, plan: FoldPlan,
                     tol: float = _DEFAULTS.cv_lasso_tol,
                     max_sweeps: int = _DEFAULTS.cv_lasso_max_sweeps) -> list[Selection]:
    """Per-column lasso penalty by k-fold squared prediction error.

    Each target column is scored on its own, so column j's choice never depends
    on another column. The grid is swept from the largest penalty down with
    warm starts; a column that hits the sweep cap scores +inf at that penalty.

    Args:
        design: n x d design.
        targets: n x m targets (or an n-vector).
        grid: Candidate penalties.
        plan: Fold plan over the n rows.

    Returns:
        One Selection per target column.
    """
    d = as_matrix(design)
    t = np.asarray(targets, dtype=np.float64)
    t = as_matrix(t[:, None] if t.ndim == 1 else t)
    _check_rows(plan, d, t)
    values = grid.values
    scores = np.zeros((len(values), t.shape[1]))

    for fold, (train, held) in enumerate(plan.folds()):
        d_tr, d_ho = _split_centered(d, train, held)
        t_tr, t_ho = _split_centered(t, train, held)
        gram = d_tr.T @ d_tr
        cross = d_tr.T @ t_tr
        start = None
        for g in reversed(range(len(values))):
            result = descend(gram, cross, values[g], start=start, tol=tol, max_sweeps=max_sweeps)
            err = np.sum((t_ho - d_ho @ result.coef) ** 2, axis=0)
            scores[g] += np.where(result.converged, err, np.inf)
            start = result.coef
            if not np.all(result.converged):
                logger.debug(
                    f"Fold {fold}: lasso at lambda={values[g]:.3g} hit the sweep cap on "
                    f"{int(np.sum(~result.converged))} columns"
                )

    return [
        _select(values, scores[:, j], "largest", f"lasso penalty (column {j})")
        for j in range(t.shape[1])
    ]


def cv_lasso_lambda(design: npt.ArrayLike, target_column: npt.ArrayLike, grid: Grid,
                    plan: FoldPlan, tol: float = _DEFAULTS.cv_lasso_tol,
                    max_sweeps: int = _DEFAULTS.cv_lasso_max_sweeps) -> Selection:
    """Lasso penalty for a single target column."""
    target = np.asarray(target_column, dtype=np.float64).ravel()
    return cv_lasso_lambdas(design, target, grid, plan, tol=tol, max_sweeps=max_sweeps)[0]


def cv_lasso_forward(data: Dataset, grid: Grid, plan: FoldPlan,
                     tol: float = _DEFAULTS.cv_lasso_tol,
                     max_sweeps: int = _DEFAULTS.cv_lasso_max_sweeps) -> list[Selection]:
    """Per-response lasso penalties for q separate lassos of Y on X."""
    return cv_lasso_lambdas(data.x_centered, data.y_centered, grid, plan, tol=tol,
                            max_sweeps=max_sweeps)


def cv_ridge(data: Dataset, grid: Grid, plan: FoldPlan,
             mode: RidgeMode = "per-response") -> list[Selection]:
    """Ridge penalties by k-fold squared prediction error.

    ``single`` mode totals the error over responses and returns one Selection;
    ``per-response`` mode returns one Selection per response.
    """
    x, y = data.x_centered, data.y_centered
    _check_rows(plan, x, y)
    values = grid.values
    scores = np.zeros((len(values), data.q))

    for train, held in plan.folds():
        x_tr, x_ho = _split_centered(x, train, held)
        y_tr, y_ho = _split_centered(y, train, held)
        full_rank = numerical_rank(x_tr) == data.p
        u, sv, vt = np.linalg.svd(x_tr, full_matrices=False)
        for g, lam in enumerate(values):
            if lam == 0 and not full_rank:
                scores[g] += np.inf
                continue
            coef = ridge_from_svd(u, sv, vt, y_tr, np.full(data.q, lam))
            scores[g] += np.sum((y_ho - x_ho @ coef) ** 2, axis=0)

    if mode == "single":
        return [_select(values, scores.sum(axis=1), "largest", "ridge penalty")]
    return [
        _select(values, scores[:, m], "largest", f"ridge penalty (response {m})")
        for m in range(data.q)
    ]


def cv_rank(data: Dataset, orientation: Orientation, plan: FoldPlan) -> Selection:
    """Reduced rank in {0, ..., min(p, q)} by k-fold squared prediction error.

    The inverse orientation predicts X from Y; the forward orientation predicts
    Y from X. A fold whose training block is too small for the closed form
    scores +inf at every rank.
    """
    if orientation == "inverse":
        design, response = data.y_centered, data.x_centered
    else:
        design, response = data.x_centered, data.y_centered
    _check_rows(plan, design, response)
    ranks = list(range(min(data.p, data.q) + 1))
    scores = np.zeros(len(ranks))

    for fold, (train, held) in enumerate(plan.folds()):
        d_tr, d_ho = _split_centered(design, train, held)
        r_tr, r_ho = _split_centered(response, train, held)
        try:
            fits = rrr_path(d_tr, r_tr, ranks)
        except InvregError as e:
            logger.warning(f"Fold {fold}: reduced-rank fit failed ({e}); scoring +inf")
            scores += np.inf
            continue
        for i, fit in enumerate(fits):
            scores[i] += float(np.sum((r_ho - d_ho @ fit.coef) ** 2))

    return _select([float(r) for r in ranks], scores, "smallest", f"{orientation} rank")


# =============================================================================
# VALIDATION-LIKELIHOOD CV
# =============================================================================


def fold_covariances(z: npt.ArrayLike, plan: FoldPlan) -> list[tuple[Matrix, Matrix]]:
    """(S_train, S_held) for every fold.

    Both blocks are centred by the training mean and each is divided by its own
    row count.
    """
    arr = as_matrix(z)
    _check_rows(plan, arr)
    pairs = []
    for train, held in plan.folds():
        z_tr, z_ho = _split_centered(arr, train, held)
        pairs.append((z_tr.T @ z_tr / z_tr.shape[0], z_ho.T @ z_ho / z_ho.shape[0]))
    return pairs


def _fit_precision(s: Matrix, gamma: float, kind: PenaltyKind, tol: float,
                   max_iter: int) -> Matrix:
    problem = PrecisionProblem(s=s, gamma=gamma, penalty_kind=kind)
    if kind == "l1-offdiag":
        return glasso(problem, tol=tol, max_iter=max_iter)
    return ridge_precision(problem)


def cv_validation_likelihood(fold_covs: Sequence[tuple[Matrix, Matrix]], grid: Grid,
                             penalty_kind: PenaltyKind = "l1-offdiag",
                             tol: float = _DEFAULTS.cv_glasso_tol,
                             max_iter: int = _DEFAULTS.glasso_max_iter) -> Selection:
    """Precision penalty minimizing the summed held-out negative log-likelihood.

    For each gamma and fold, the precision estimate Omega is fit on S_train and
    scored by tr(Omega S_held) - log det Omega.

    Args:
        fold_covs: Output of fold_covariances.
        grid: Candidate penalties.
        penalty_kind: ``l1-offdiag`` (graphical lasso) or ``l2-all`` (ridge precision).

    Returns:
        The selected penalty.
    """
    values = grid.values
    scores = np.zeros(len(values))
    for g, gamma in enumerate(values):
        for fold, (s_train, s_held) in enumerate(fold_covs):
            try:
                omega = _fit_precision(s_train, gamma, penalty_kind, tol, max_iter)
                scores[g] += float(np.sum(omega * s_held)) - log_det_spd(omega)
            except InvregError as e:
                logger.debug(f"Fold {fold}: precision fit at gamma={gamma:.3g} failed: {e}")
                scores[g] = np.inf
                break
    return _select(values, scores, "largest", f"{penalty_kind} precision penalty")
