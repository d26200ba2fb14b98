"""Configuration: solver settings, environment overrides and key=value config files."""

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from dotenv import dotenv_values, load_dotenv

from invreg.errors import ParseError

logger = logging.getLogger(__name__)

DEFAULT_GRID_SPEC = "log10:-8:8:0.5"

# Auto-load .env from project root
_env_loaded = False


def _ensure_env_loaded() -> None:
    """Load .env file if not already loaded."""
    global _env_loaded
    if _env_loaded:
        return

    # Nearest .env walking up from the working directory, then from this file
    starts = [Path.cwd().resolve(), Path(__file__).resolve()]
    for start in starts:
        env_file = next(
            (parent / ".env" for parent in [start, *start.parents] if (parent / ".env").exists()),
            None,
        )
        if env_file is not None:
            load_dotenv(env_file)
            logger.debug(f"Loaded environment from {env_file}")
            break

    _env_loaded = True


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse a tuning grid.

    Two forms are accepted:
    - ``log10:a:b:step`` gives 10**a, 10**(a+step), ..., 10**b
    - ``v1,v2,...`` gives the listed values

    Args:
        text: Grid specification.

    Returns:
        Grid values in ascending order, duplicates removed.

    Raises:
        ParseError: If the text is malformed or a value is negative.
    """
    text = text.strip()
    try:
        if text.startswith("log10:"):
            _, start, stop, step = text.split(":")
            a, b, h = float(start), float(stop), float(step)
            if h <= 0 or b < a:
                raise ParseError(f"Grid range must be increasing with positive step, got {text!r}")
            count = int(round((b - a) / h)) + 1
            values = 10.0 ** (a + h * np.arange(count))
        else:
            values = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as e:
        if isinstance(e, ParseError):
            raise
        raise ParseError(f"Could not parse grid {text!r}: {e}") from e

    if values.size == 0:
        raise ParseError("Grid must contain at least one value")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ParseError(f"Grid values must be finite and non-negative, got {text!r}")
    return tuple(float(v) for v in np.unique(values))


@dataclass(frozen=True)
class Settings:
    """Solver and runner settings shared by every estimator.

    Attributes:
        lasso_tol: Relative coordinate-change tolerance of final lasso fits.
        lasso_max_sweeps: Sweep cap of final lasso fits.
        cv_lasso_tol: Tolerance used inside cross-validation sweeps.
        cv_lasso_max_sweeps: Sweep cap inside cross-validation sweeps.
        glasso_tol: Dual-gap tolerance of final graphical lasso fits.
        cv_glasso_tol: Dual-gap tolerance inside cross-validation sweeps.
        glasso_max_iter: Outer iteration cap of the graphical lasso.
        folds: Number of cross-validation folds.
        test_fraction: Held-out share of rows in the holdout study.
        workers: Process count for replication loops.
        grid: Candidate tuning parameters for lasso, ridge and precision penalties.
    """

    lasso_tol: float = 1e-10
    lasso_max_sweeps: int = 100_000
    cv_lasso_tol: float = 1e-7
    cv_lasso_max_sweeps: int = 10_000
    glasso_tol: float = 1e-8
    cv_glasso_tol: float = 1e-6
    glasso_max_iter: int = 1000
    folds: int = 5
    test_fraction: float = 0.4
    workers: int = 1
    grid: tuple[float, ...] = field(default_factory=lambda: parse_grid(DEFAULT_GRID_SPEC))

    def with_overrides(self, **changes: object) -> "Settings":
        """Return a copy with the given fields replaced (None values are ignored)."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def describe(self) -> dict[str, object]:
        """Flat description for report provenance."""
        return {
            "lasso_tol": self.lasso_tol,
            "lasso_max_sweeps": self.lasso_max_sweeps,
            "cv_lasso_tol": self.cv_lasso_tol,
            "cv_lasso_max_sweeps": self.cv_lasso_max_sweeps,
            "glasso_tol": self.glasso_tol,
            "cv_glasso_tol": self.cv_glasso_tol,
            "glasso_max_iter": self.glasso_max_iter,
            "folds": self.folds,
            "grid_size": len(self.grid),
            "grid_min": min(self.grid),
            "grid_max": max(self.grid),
        }


def get_settings() -> Settings:
    """Build Settings from defaults plus environment overrides.

    Automatically loads .env file from project root if present.
    Recognized variables: INVREG_WORKERS, INVREG_FOLDS, INVREG_GRID.

    Returns:
        Settings with environment overrides applied.

    Raises:
        ParseError: If an environment value cannot be parsed.
    """
    _ensure_env_loaded()

    settings = Settings()
    try:
        workers = os.environ.get("INVREG_WORKERS")
        folds = os.environ.get("INVREG_FOLDS")
        grid = os.environ.get("INVREG_GRID")
        return settings.with_overrides(
            workers=int(workers) if workers else None,
            folds=int(folds) if folds else None,
            grid=parse_grid(grid) if grid else None,
        )
    except ValueError as e:
        raise ParseError(
            f"Invalid invreg environment setting: {e}\n"
            "INVREG_WORKERS and INVREG_FOLDS must be integers."
        ) from e


def get_log_level() -> str:
    """Log level name from INVREG_LOG_LEVEL (default INFO)."""
    _ensure_env_loaded()
    return os.environ.get("INVREG_LOG_LEVEL", "INFO").upper()


def load_config_file(path: str | Path, allowed_keys: set[str]) -> dict[str, str]:
    """Read a key=value experiment config file.

    Lines are ``key=value``; ``#`` starts a comment. Keys are normalized to
    lower case with dashes, so ``rho_y`` and ``rho-y`` are the same key.

    Args:
        path: Config file path (UTF-8).
        allowed_keys: Normalized keys the caller understands.

    Returns:
        Mapping of normalized key to raw string value.

    Raises:
        ParseError: If the file is missing, a key is unknown or has no value.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"Config file not found: {path}")

    raw = dotenv_values(path, encoding="utf-8")
    values: dict[str, str] = {}
    for key, value in raw.items():
        norm = key.strip().lower().replace("_", "-")
        if norm not in allowed_keys:
            raise ParseError(
                f"Unknown config key {key!r} in {path}\n"
                f"Known keys: {', '.join(sorted(allowed_keys))}"
            )
        if value is None or not value.strip():
            raise ParseError(f"Config key {key!r} in {path} has no value")
        values[norm] = value.strip()

    logger.debug(f"Loaded {len(values)} config values from {path}")
    return values


def parse_float_list(text: str) -> list[float]:
    """Parse ``0.0,0.5,0.7`` into floats."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ParseError(f"Expected comma-separated numbers, got {text!r}") from e


def parse_int_list(text: str) -> list[int]:
    """Parse ``100,400,1600`` into ints."""
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ParseError(f"Expected comma-separated integers, got {text!r}") from e


def parse_name_list(text: str) -> list[str]:
    """Parse ``I_L1,OLS_MP`` into stripped names."""
    names = [v.strip() for v in text.split(",") if v.strip()]
    if not names:
        raise ParseError("Expected at least one name")
    return names
