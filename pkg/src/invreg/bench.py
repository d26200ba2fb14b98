"""Experiment runner: Monte-Carlo replications, holdout prediction study, decay diagnostic.

Replications are the unit of parallel work. Each one derives its own seed from
the base seed, fits every requested estimator on one shared IndirectFitter and
returns its records; the runner collects them in task order, so a report is
identical for any worker count. Estimator failures become missing records with
a reason instead of stopping the run.
"""

import hashlib
import itertools
import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, NamedTuple, TypeVar

import numpy as np
import numpy.typing as npt
import pandas as pd

from invreg.config import Settings
from invreg.errors import InvregError, MissingOracle, ParseError, ShapeMismatch, TooFewRows
from invreg.indirect import (
    ORACLE_NAMES,
    BetaEstimate,
    IndirectFitter,
    canonical_name,
    population_plugins,
    predict,
)
from invreg.matlin import Matrix, as_matrix, norms, spd_sqrt
from invreg.simgen import (
    SAMPLER_METADATA,
    STREAM_DATA,
    STREAM_SPLIT,
    STREAM_TRUTH,
    JointGroundTruth,
    ModelSpec,
    ReducedRankForwardModelSpec,
    ReducedRankInverseModelSpec,
    SparseInverseModelSpec,
    center,
    draw_truth,
    generate,
    make_rng,
    orientation_of,
    replication_seed,
    sample_dataset,
)

logger = logging.getLogger(__name__)

DESIGNS = ("sparse-inverse", "rr-inverse", "rr-forward")
DESIGN_PARAMETERS: dict[str, tuple[str, ...]] = {
    "sparse-inverse": ("rho_y", "rho_delta", "s_star"),
    "rr-inverse": ("rho_y", "rho_delta", "r_star"),
    "rr-forward": ("rho_x", "rho_e", "r_star"),
}
MIN_DATASET_ROWS = 10

REPORT_COLUMNS = [
    "design", "n", "p", "q", "rho_y", "rho_delta", "rho_x", "rho_e", "s_star", "r_star",
    "estimator", "response", "mean", "se", "reps", "missing",
]

REPORT_NOTES = {
    "centering": "predictors and responses are centred, never scaled",
    "lasso_standardization": "none; raw objective scaling, grid unscaled",
    "eta_sharing": "one lasso eta per replication for I_L1, I_S, I_L2 and the O family; "
                   "one reduced-rank eta for I_r, I_ML_r and the O_r family",
    "rank_grid": "0..min(p, q)",
    "validation_likelihood": "summed held-out negative log-likelihood, minimized",
    "replication_seed": "base_seed XOR replication index, shared by every cell",
}

T = TypeVar("T")


# =============================================================================
# LOSSES
# =============================================================================


def model_error(beta_hat: npt.ArrayLike, truth: JointGroundTruth) -> float:
    """||Sigma_XX^1/2 (beta_hat - beta*)||_F^2.

    Raises:
        ShapeMismatch: If beta_hat and beta* differ in shape.
    """
    beta = as_matrix(beta_hat)
    if beta.shape != truth.beta_star.shape:
        raise ShapeMismatch(f"Estimate is {beta.shape} but the truth is {truth.beta_star.shape}")
    weighted = spd_sqrt(truth.sigma_xx_star) @ (beta - truth.beta_star)
    return float(np.sum(weighted**2))


def prediction_error(beta_est: BetaEstimate, test_x: npt.ArrayLike,
                     test_y: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Per-response sum over test rows of (y - mu_hat - beta_hat' x)^2.

    Raises:
        ShapeMismatch: If the test blocks disagree with the fitted dimensions.
    """
    x = as_matrix(test_x)
    y = as_matrix(test_y)
    if x.shape[0] != y.shape[0] or y.shape[1] != beta_est.beta_hat.shape[1]:
        raise ShapeMismatch(
            f"Test blocks {x.shape} / {y.shape} do not match a {beta_est.beta_hat.shape} model"
        )
    return np.asarray(np.sum((y - predict(beta_est, x)) ** 2, axis=0))


def summarize(losses: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (sample sd with ddof=1 over sqrt(reps)); nan when undefined."""
    values = np.asarray(losses, dtype=np.float64)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    if values.size == 1:
        return mean, math.nan
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


# =============================================================================
# DATASET INGESTION
# =============================================================================


class RawDataset(NamedTuple):
    """Uncentred predictor and response blocks read from a CSV file."""
    x: Matrix
    y: Matrix
    x_names: list[str]
    y_names: list[str]


def load_dataset_csv(path: str | Path) -> RawDataset:
    """Read a dataset whose columns are tagged ``x_`` (predictor) or ``y_`` (response).

    Other columns are ignored. Cells must be plain decimal numbers.

    Raises:
        ParseError: If the file cannot be read, lacks x_ or y_ columns, or has
            missing or non-numeric cells.
        TooFewRows: If fewer than 10 rows remain.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, sep=",", decimal=".", encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"Could not read dataset {path}: {e}") from e

    x_names = [str(c) for c in frame.columns if str(c).startswith("x_")]
    y_names = [str(c) for c in frame.columns if str(c).startswith("y_")]
    if not x_names or not y_names:
        raise ParseError(
            f"Dataset {path} needs at least one x_ and one y_ column, "
            f"found columns {list(frame.columns)}"
        )

    numeric = frame[x_names + y_names].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna()
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise ParseError(
            f"Dataset {path} has a missing or non-numeric value in column "
            f"{numeric.columns[col]!r}, data row {row + 1}"
        )
    if len(numeric) < MIN_DATASET_ROWS:
        raise TooFewRows(
            f"Dataset {path} has {len(numeric)} rows; at least {MIN_DATASET_ROWS} needed"
        )

    logger.info(f"Loaded {path}: n={len(numeric)}, p={len(x_names)}, q={len(y_names)}")
    return RawDataset(
        x=numeric[x_names].to_numpy(dtype=np.float64),
        y=numeric[y_names].to_numpy(dtype=np.float64),
        x_names=x_names,
        y_names=y_names,
    )


# =============================================================================
# CONFIGURATION AND REPORT TYPES
# =============================================================================


@dataclass(frozen=True)
class Cell:
    """One parameter setting of a design; parameters the design does not use are None."""

    design: str
    n: int
    p: int
    q: int
    rho_y: float | None = None
    rho_delta: float | None = None
    rho_x: float | None = None
    rho_e: float | None = None
    s_star: float | None = None
    r_star: int | None = None

    def __post_init__(self) -> None:
        if self.design not in DESIGNS:
            raise ValueError(
                f"Unknown design {self.design!r}; expected one of {', '.join(DESIGNS)}"
            )
        missing = [name for name in DESIGN_PARAMETERS[self.design] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"Design {self.design} needs {', '.join(missing)}")

    def model_spec(self, seed: int) -> ModelSpec:
        """The generator spec of this cell for one replication seed."""
        if self.design == "sparse-inverse":
            assert self.rho_y is not None and self.rho_delta is not None and self.s_star is not None
            return SparseInverseModelSpec(self.n, self.p, self.q, self.rho_y, self.rho_delta,
                                          self.s_star, seed)
        if self.design == "rr-inverse":
            assert self.rho_y is not None and self.rho_delta is not None and self.r_star is not None
            return ReducedRankInverseModelSpec(self.n, self.p, self.q, self.rho_y, self.rho_delta,
                                               self.r_star, seed)
        assert self.rho_x is not None and self.rho_e is not None and self.r_star is not None
        return ReducedRankForwardModelSpec(self.n, self.p, self.q, self.rho_x, self.rho_e,
                                           self.r_star, seed)

    def describe(self) -> dict[str, Any]:
        return asdict(self)


def _as_tuple(values: Any) -> tuple[Any, ...]:
    if isinstance(values, (list, tuple)):
        return tuple(values)
    return (values,)


@dataclass(frozen=True)
class ExperimentConfig:
    """A Monte-Carlo experiment over a design.

    Cells are the cartesian product of the parameter lists that apply to the
    design, unless explicit_cells lists them directly (published tables are
    not full products).
    """

    design: str
    estimators: tuple[str, ...]
    n: tuple[int, ...] = (100,)
    p: tuple[int, ...] = (20,)
    q: tuple[int, ...] = (20,)
    rho_y: tuple[float, ...] = (0.7,)
    rho_delta: tuple[float, ...] = (0.0,)
    rho_x: tuple[float, ...] = (0.7,)
    rho_e: tuple[float, ...] = (0.9,)
    s_star: tuple[float, ...] = (0.1,)
    r_star: tuple[int, ...] = (10,)
    replications: int = 50
    base_seed: int = 0
    explicit_cells: tuple[Cell, ...] = ()

    def __post_init__(self) -> None:
        if self.design not in DESIGNS:
            raise ValueError(
                f"Unknown design {self.design!r}; expected one of {', '.join(DESIGNS)}"
            )
        if self.replications < 1:
            raise ValueError(f"Replications must be at least 1, got {self.replications}")
        if not self.estimators:
            raise ValueError("At least one estimator is required")
        names = tuple(canonical_name(name) for name in self.estimators)
        object.__setattr__(self, "estimators", names)
        for attr in ("n", "p", "q", "rho_y", "rho_delta", "rho_x", "rho_e", "s_star", "r_star"):
            object.__setattr__(self, attr, _as_tuple(getattr(self, attr)))
        for cell in self.explicit_cells:
            if cell.design != self.design:
                raise ValueError(f"Cell design {cell.design} does not match {self.design}")

    def cells(self) -> list[Cell]:
        """Every parameter cell of the experiment, in a fixed order."""
        if self.explicit_cells:
            return list(self.explicit_cells)
        dims = list(itertools.product(self.n, self.p, self.q))
        if self.design == "sparse-inverse":
            return [
                Cell(self.design, n, p, q, rho_y=ry, rho_delta=rd, s_star=s)
                for ry, rd, s in itertools.product(self.rho_y, self.rho_delta, self.s_star)
                for n, p, q in dims
            ]
        if self.design == "rr-inverse":
            return [
                Cell(self.design, n, p, q, rho_y=ry, rho_delta=rd, r_star=r)
                for ry, rd, r in itertools.product(self.rho_y, self.rho_delta, self.r_star)
                for n, p, q in dims
            ]
        return [
            Cell(self.design, n, p, q, rho_x=rx, rho_e=re, r_star=r)
            for rx, re, r in itertools.product(self.rho_x, self.rho_e, self.r_star)
            for n, p, q in dims
        ]

    def describe(self) -> dict[str, Any]:
        return {
            "design": self.design,
            "estimators": list(self.estimators),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "cells": [cell.describe() for cell in self.cells()],
        }


@dataclass(frozen=True)
class ReplicationRecord:
    """Losses of one estimator on one replication (None when the fit failed)."""

    cell: Cell | None
    estimator: str
    replication: int
    seed: int
    losses: tuple[float, ...] | None
    metadata: dict[str, Any] = field(default_factory=dict)
    reason: str | None = None


@dataclass(frozen=True)
class SummaryRow:
    """Mean and standard error of one estimator (and response) over replications."""

    cell: Cell | None
    estimator: str
    response: str | None
    mean: float
    se: float
    reps: int
    missing: int


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated results with the per-replication records they were computed from.

    Attributes:
        kind: ``simulation``, ``holdout`` or ``decay``.
        rows: Summary rows in report order.
        records: Per-replication records in report order.
        provenance: Config hash, seeds, sampler and solver settings.
        responses: Labels of the loss components (one unnamed loss for simulations).
    """

    kind: str
    rows: tuple[SummaryRow, ...]
    records: tuple[ReplicationRecord, ...]
    provenance: dict[str, Any]
    responses: tuple[str | None, ...] = (None,)


def _failure_reason(error: Exception) -> str:
    return f"{type(error).__name__}: {error}".splitlines()[0]


def _aggregate(records: Sequence[ReplicationRecord],
               responses: Sequence[str | None]) -> tuple[SummaryRow, ...]:
    """Summary rows keyed by (cell, estimator) in first-seen order."""
    groups: dict[tuple[Cell | None, str], list[ReplicationRecord]] = {}
    for rec in records:
        groups.setdefault((rec.cell, rec.estimator), []).append(rec)

    rows: list[SummaryRow] = []
    for (cell, estimator), recs in groups.items():
        ok = [rec.losses for rec in recs if rec.losses is not None]
        for k, label in enumerate(responses):
            mean, se = summarize([losses[k] for losses in ok])
            rows.append(SummaryRow(cell, estimator, label, mean, se, len(ok), len(recs) - len(ok)))
    return tuple(rows)


def _config_hash(description: dict[str, Any]) -> str:
    blob = json.dumps(description, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _provenance(kind: str, description: dict[str, Any], base_seed: int,
                settings: Settings) -> dict[str, Any]:
    return {
        "kind": kind,
        "config_hash": _config_hash(description),
        "base_seed": base_seed,
        "sampler": dict(SAMPLER_METADATA),
        "settings": settings.describe(),
        "notes": dict(REPORT_NOTES),
        "config": description,
    }


def _run_tasks(fn: Callable[..., T], tasks: Sequence[tuple[Any, ...]], workers: int) -> list[T]:
    """Run tasks in a process pool and return results in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *task) for task in tasks]
        return [future.result() for future in futures]


# =============================================================================
# SIMULATION
# =============================================================================


def _simulate_replication(cell: Cell, estimators: tuple[str, ...], base_seed: int,
                          replication: int, settings: Settings) -> list[ReplicationRecord]:
    seed = replication_seed(base_seed, replication)
    truth, data = generate(cell.model_spec(seed))
    fitter = IndirectFitter(data, settings, fold_seed=seed, oracle=population_plugins(truth))
    records = []
    for name in estimators:
        try:
            estimate = fitter.fit(name)
            loss = model_error(estimate.beta_hat, truth)
            records.append(ReplicationRecord(cell, name, replication, seed, (loss,),
                                             estimate.metadata))
        except (InvregError, np.linalg.LinAlgError) as e:
            logger.warning(f"{name} failed on {cell.design} n={cell.n} rep={replication}: {e}")
            records.append(ReplicationRecord(cell, name, replication, seed, None,
                                             reason=_failure_reason(e)))
    return records


def run_simulation(config: ExperimentConfig, settings: Settings | None = None) -> ExperimentReport:
    """Run every replication of every cell and aggregate model errors.

    Args:
        config: Experiment definition.
        settings: Solver settings and worker count (defaults to Settings()).

    Returns:
        Report with one summary row per (cell, estimator).
    """
    settings = settings or Settings()
    cells = config.cells()
    tasks = [
        (cell, config.estimators, config.base_seed, rep, settings)
        for cell in cells
        for rep in range(config.replications)
    ]
    logger.info(
        f"Simulating {len(cells)} cells x {config.replications} replications x "
        f"{len(config.estimators)} estimators on {settings.workers} worker(s)"
    )
    per_task = _run_tasks(_simulate_replication, tasks, settings.workers)

    order = {name: i for i, name in enumerate(config.estimators)}
    records = sorted(
        (rec for batch in per_task for rec in batch),
        key=lambda rec: (cells.index(rec.cell) if rec.cell else -1, order[rec.estimator],
                         rec.replication),
    )
    rows = _aggregate(records, (None,))
    for row in rows:
        if row.missing:
            logger.warning(f"{row.estimator}: {row.missing} of {config.replications} replications "
                           f"missing on {row.cell}")
    provenance = _provenance("simulation", config.describe(), config.base_seed, settings)
    return ExperimentReport("simulation", rows, tuple(records), provenance)


# =============================================================================
# HOLDOUT STUDY
# =============================================================================


def _holdout_replication(raw: RawDataset, estimators: tuple[str, ...], base_seed: int,
                         replication: int, test_fraction: float,
                         settings: Settings) -> list[ReplicationRecord]:
    seed = replication_seed(base_seed, replication)
    n = raw.x.shape[0]
    n_test = int(round(test_fraction * n))
    order = make_rng(seed, STREAM_SPLIT).permutation(n)
    test, train = np.sort(order[:n_test]), np.sort(order[n_test:])
    fitter = IndirectFitter(center(raw.x[train], raw.y[train]), settings, fold_seed=seed)
    records = []
    for name in estimators:
        try:
            estimate = fitter.fit(name)
            errors = prediction_error(estimate, raw.x[test], raw.y[test]) / n_test
            records.append(ReplicationRecord(None, name, replication, seed,
                                             tuple(float(v) for v in errors), estimate.metadata))
        except (InvregError, np.linalg.LinAlgError) as e:
            logger.warning(f"{name} failed on holdout split {replication}: {e}")
            records.append(ReplicationRecord(None, name, replication, seed, None,
                                             reason=_failure_reason(e)))
    return records


def run_holdout_study(csv_path: str | Path, estimators: Sequence[str], replications: int = 500,
                      test_fraction: float | None = None, seed: int = 0,
                      settings: Settings | None = None) -> ExperimentReport:
    """Repeated random train/test splits of a CSV dataset.

    Each split fits every estimator on the training rows and records, per
    response, the squared prediction error averaged over the test rows. The
    report gives the mean and standard error of that average over splits.

    Raises:
        ParseError: If the dataset cannot be parsed.
        TooFewRows: If the dataset has fewer than 10 rows.
        MissingOracle: If an oracle estimator is requested.
    """
    settings = settings or Settings()
    fraction = settings.test_fraction if test_fraction is None else test_fraction
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"Test fraction must lie in (0, 1), got {fraction}")
    if replications < 1:
        raise ValueError(f"Replications must be at least 1, got {replications}")
    names = tuple(canonical_name(name) for name in estimators)
    oracles = [name for name in names if name in ORACLE_NAMES]
    if oracles:
        raise MissingOracle(f"Holdout data has no ground truth for {', '.join(oracles)}")

    raw = load_dataset_csv(csv_path)
    n = raw.x.shape[0]
    n_test = int(round(fraction * n))
    if n_test < 1 or n - n_test < settings.folds:
        raise TooFewRows(f"A {fraction:.2f} test split of {n} rows leaves too few rows to fit")

    tasks = [(raw, names, seed, rep, fraction, settings) for rep in range(replications)]
    logger.info(f"Holdout study: {replications} splits of n={n} ({n_test} test rows)")
    per_task = _run_tasks(_holdout_replication, tasks, settings.workers)
    order = {name: i for i, name in enumerate(names)}
    records = sorted((rec for batch in per_task for rec in batch),
                     key=lambda rec: (order[rec.estimator], rec.replication))

    description = {
        "dataset": Path(csv_path).name,
        "dataset_sha256": hashlib.sha256(Path(csv_path).read_bytes()).hexdigest(),
        "estimators": list(names),
        "replications": replications,
        "test_fraction": fraction,
        "aggregation": "per-response squared error averaged over test rows, then over splits",
    }
    provenance = _provenance("holdout", description, seed, settings)
    responses = tuple(raw.y_names)
    return ExperimentReport("holdout", _aggregate(records, responses), tuple(records), provenance,
                            responses)


# =============================================================================
# DECAY DIAGNOSTIC
# =============================================================================


def _decay_replication(cell: Cell, n_list: tuple[int, ...], estimator: str, base_seed: int,
                       replication: int, settings: Settings) -> list[ReplicationRecord]:
    seed = replication_seed(base_seed, replication)
    spec = cell.model_spec(seed)
    truth = draw_truth(spec, make_rng(seed, STREAM_TRUTH))
    oracle = population_plugins(truth)
    records = []
    for n in n_list:
        data = sample_dataset(truth, n, make_rng(seed, STREAM_DATA), orientation_of(spec))
        sized = Cell(**{**cell.describe(), "n": n})
        try:
            estimate = IndirectFitter(data, settings, fold_seed=seed, oracle=oracle).fit(estimator)
            error = norms(estimate.beta_hat - truth.beta_star).spectral
            records.append(ReplicationRecord(sized, estimator, replication, seed, (error,),
                                             estimate.metadata))
        except (InvregError, np.linalg.LinAlgError) as e:
            logger.warning(f"{estimator} failed at n={n} rep={replication}: {e}")
            records.append(ReplicationRecord(sized, estimator, replication, seed, None,
                                             reason=_failure_reason(e)))
    return records


def decay_diagnostic(cell: Cell, n_list: Sequence[int], estimator: str = "I_L1",
                     replications: int = 50, base_seed: int = 0,
                     settings: Settings | None = None) -> ExperimentReport:
    """Mean spectral-norm error ||beta_hat - beta*|| as the sample size grows.

    The truth of a replication is drawn once and reused for every n, so only
    the sample changes along a row. No rate is asserted; the trend is logged.

    Raises:
        ValueError: If n_list is empty or not strictly increasing.
    """
    settings = settings or Settings()
    sizes = tuple(int(n) for n in n_list)
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"n_list must be non-empty and strictly increasing, got {list(sizes)}")
    name = canonical_name(estimator)

    tasks = [(cell, sizes, name, base_seed, rep, settings) for rep in range(replications)]
    per_task = _run_tasks(_decay_replication, tasks, settings.workers)
    records = sorted((rec for batch in per_task for rec in batch),
                     key=lambda rec: (rec.cell.n if rec.cell else 0, rec.replication))
    rows = _aggregate(records, (None,))

    means = [row.mean for row in rows]
    trend = "decreasing" if all(b < a for a, b in zip(means, means[1:])) else "not monotone"
    logger.info(f"Decay of {name} over n={list(sizes)}: {[f'{m:.4g}' for m in means]} ({trend})")

    description = {
        "cell": cell.describe(),
        "n_list": list(sizes),
        "estimator": name,
        "replications": replications,
        "loss": "spectral norm of beta_hat - beta*",
    }
    provenance = _provenance("decay", description, base_seed, settings)
    return ExperimentReport("decay", rows, tuple(records), provenance)


# =============================================================================
# REPORT OUTPUT
# =============================================================================


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    """Summary rows as a DataFrame with the report column layout."""
    rows = []
    for row in report.rows:
        cell = row.cell.describe() if row.cell else {}
        rows.append({
            **{col: cell.get(col) for col in REPORT_COLUMNS[:10]},
            "design": cell.get("design", report.kind),
            "estimator": row.estimator,
            "response": row.response,
            "mean": row.mean,
            "se": row.se,
            "reps": row.reps,
            "missing": row.missing,
        })
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


class _ReportEncoder(json.JSONEncoder):
    """JSON encoder for numpy scalars and arrays in report records.

    Floats go out as their shortest round-trip repr (at most 17 significant
    digits), so every value reads back as the identical double.
    """

    def default(self, o: Any) -> Any:
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


def _json_line(record: dict[str, Any]) -> str:
    return json.dumps(record, cls=_ReportEncoder, allow_nan=False)


def sidecar_path(out_path: str | Path) -> Path:
    """JSON-lines sidecar next to a report CSV (``report.csv`` -> ``report.jsonl``)."""
    return Path(out_path).with_suffix(".jsonl")


def write_report(report: ExperimentReport, out_path: str | Path) -> Path:
    """Write the summary CSV and its JSON-lines sidecar.

    The sidecar's first line is the provenance record; every following line
    is one replication record with its losses, tuning metadata and failure
    reason. CSV floats use 17 significant digits; sidecar floats use their
    round-trip repr. Both read back bit for bit.

    Returns:
        Path of the sidecar file.
    """
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    report_frame(report).to_csv(out, index=False, float_format="%.17g", na_rep="",
                                lineterminator="\n")

    sidecar = sidecar_path(out)
    lines = [_json_line({"record": "provenance", **report.provenance})]
    for rec in report.records:
        lines.append(_json_line({
            "record": "replication",
            "cell": rec.cell.describe() if rec.cell else None,
            "estimator": rec.estimator,
            "replication": rec.replication,
            "seed": rec.seed,
            "responses": list(report.responses),
            "losses": list(rec.losses) if rec.losses is not None else None,
            "metadata": rec.metadata,
            "reason": rec.reason,
        }))
    sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(
        f"Wrote {len(report.rows)} summary rows to {out} "
        f"and {len(report.records)} records to {sidecar}"
    )
    return sidecar
