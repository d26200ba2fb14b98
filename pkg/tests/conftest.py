"""Shared pytest fixtures and helpers: seeded generators, SPD builders, small datasets."""

import logging

import numpy as np
import pytest

from invreg.config import Settings
from invreg.simgen import (
    ReducedRankForwardModelSpec,
    ReducedRankInverseModelSpec,
    SparseInverseModelSpec,
    center,
    generate,
)

logger = logging.getLogger(__name__)

# Coarser grid than the default keeps the CV-heavy tests quick.
FAST_GRID = tuple(10.0 ** np.arange(-4.0, 4.5, 1.0))


def random_spd(rng, dim, floor=0.5):
    """Random SPD matrix with smallest eigenvalue at least `floor`."""
    a = rng.standard_normal((dim, dim))
    return a @ a.T / dim + floor * np.eye(dim)


def random_joint_covariance(rng, p, q):
    """Random (p+q)x(p+q) SPD joint covariance."""
    return random_spd(rng, p + q, floor=0.3)


@pytest.fixture
def rng():
    """Fresh seeded generator for each test."""
    return np.random.default_rng(20240917)


@pytest.fixture
def fast_settings():
    """Settings with a short grid and looser CV tolerances."""
    return Settings(grid=FAST_GRID, cv_lasso_tol=1e-6)


@pytest.fixture
def sparse_case():
    """(truth, data) of a small sparse-inverse replication."""
    spec = SparseInverseModelSpec(n=60, p=6, q=5, rho_y=0.5, rho_delta=0.3, s_star=0.3, seed=7)
    return generate(spec)


@pytest.fixture
def rr_inverse_case():
    """(truth, data) of a small reduced-rank inverse replication."""
    spec = ReducedRankInverseModelSpec(n=80, p=6, q=5, rho_y=0.5, rho_delta=0.5, r_star=2, seed=3)
    return generate(spec)


@pytest.fixture
def rr_forward_case():
    """(truth, data) of a small reduced-rank forward replication."""
    spec = ReducedRankForwardModelSpec(n=80, p=6, q=5, rho_x=0.5, rho_e=0.5, r_star=2, seed=5)
    return generate(spec)


@pytest.fixture
def linear_data(rng):
    """Noise-free linear data: raw X, raw Y, true beta and intercept."""
    n, p, q = 40, 4, 3
    x = rng.standard_normal((n, p)) + 2.0
    beta = rng.standard_normal((p, q))
    intercept = np.array([1.0, -2.0, 0.5])
    y = x @ beta + intercept
    return x, y, beta, intercept


@pytest.fixture
def linear_dataset(linear_data):
    """Centred Dataset of the noise-free linear data."""
    x, y, _, _ = linear_data
    return center(x, y)


def write_dataset_csv(path, x, y, extra=None):
    """Write x_/y_ tagged columns to a CSV file and return the path."""
    lines = []
    header = [f"x_{j}" for j in range(x.shape[1])] + [f"y_{m}" for m in range(y.shape[1])]
    if extra:
        header.append(extra)
    lines.append(",".join(header))
    for i in range(x.shape[0]):
        row = [repr(float(v)) for v in x[i]] + [repr(float(v)) for v in y[i]]
        if extra:
            row.append("label")
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {x.shape[0]} rows to {path}")
    return path
