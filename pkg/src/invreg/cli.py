"""Command-line entry point: ``invreg simulate | holdout | decay | reproduce-table``.

Every option can also come from a ``--config`` file of ``key=value`` lines
whose keys are the long flag names. Flags override file values, file values
override environment settings, and those override the built-in defaults.
"""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from invreg.bench import (
    DESIGN_PARAMETERS,
    DESIGNS,
    Cell,
    ExperimentConfig,
    ExperimentReport,
    decay_diagnostic,
    run_holdout_study,
    run_simulation,
    write_report,
)
from invreg.config import (
    Settings,
    get_log_level,
    get_settings,
    load_config_file,
    parse_float_list,
    parse_grid,
    parse_int_list,
    parse_name_list,
)
from invreg.errors import InvregError
from invreg.tables import compare_with_published, table_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)8s] %(name)s: %(message)s"

EXIT_OK = 0
EXIT_USAGE = 2


def _design(text: str) -> str:
    if text not in DESIGNS:
        raise ValueError(f"unknown design {text!r}")
    return text


# Parser of every option that may appear as a flag or a config key.
OPTIONS: dict[str, Callable[[str], Any]] = {
    "design": _design,
    "n": parse_int_list,
    "p": parse_int_list,
    "q": parse_int_list,
    "rho-y": parse_float_list,
    "rho-delta": parse_float_list,
    "rho-x": parse_float_list,
    "rho-e": parse_float_list,
    "s-star": parse_float_list,
    "r-star": parse_int_list,
    "estimators": parse_name_list,
    "estimator": str,
    "n-list": parse_int_list,
    "reps": int,
    "seed": int,
    "out": Path,
    "data": Path,
    "test-frac": float,
    "grid": parse_grid,
    "folds": int,
    "workers": int,
}

_CELL_KEYS = ("design", "n", "p", "q", "rho-y", "rho-delta", "rho-x", "rho-e", "s-star", "r-star")
_COMMON_KEYS = ("reps", "seed", "out", "grid", "folds", "workers")
COMMAND_KEYS: dict[str, tuple[str, ...]] = {
    "simulate": _CELL_KEYS + ("estimators",) + _COMMON_KEYS,
    "holdout": ("data", "test-frac", "estimators") + _COMMON_KEYS,
    "decay": _CELL_KEYS + ("n-list", "estimator") + _COMMON_KEYS,
    "reproduce-table": _COMMON_KEYS,
}


# =============================================================================
# ARGUMENT PARSING
# =============================================================================


def _add(parser: argparse.ArgumentParser, key: str, help_text: str) -> None:
    parser.add_argument(f"--{key}", type=OPTIONS[key], default=None, help=help_text)


def _add_cell_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--design", type=_design, default=None, choices=DESIGNS,
                        help="Simulation design")
    _add(parser, "n", "Sample sizes (comma separated)")
    _add(parser, "p", "Predictor counts")
    _add(parser, "q", "Response counts")
    _add(parser, "rho-y", "AR(1) parameters of Sigma_YY (inverse designs)")
    _add(parser, "rho-delta", "AR(1) parameters of Delta (inverse designs)")
    _add(parser, "rho-x", "AR(1) parameters of Sigma_XX (rr-forward)")
    _add(parser, "rho-e", "AR(1) parameters of Sigma_E (rr-forward)")
    _add(parser, "s-star", "Nonzero probabilities of eta (sparse-inverse)")
    _add(parser, "r-star", "True ranks (reduced-rank designs)")


def _add_run_options(parser: argparse.ArgumentParser, default_reps: int) -> None:
    _add(parser, "reps", f"Replications (default {default_reps})")
    _add(parser, "seed", "Base seed (default 0)")
    _add(parser, "out", "Report CSV path; a .jsonl sidecar is written next to it")
    _add(parser, "grid", "Tuning grid: log10:a:b:step or a comma list")
    _add(parser, "folds", "Cross-validation folds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invreg",
        description="Indirect multivariate regression estimators and their Monte-Carlo benchmark",
    )
    parser.add_argument("--config", type=Path, default=None, help="key=value experiment file")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Monte-Carlo model-error study")
    _add_cell_options(simulate)
    _add(simulate, "estimators", "Estimator names (comma separated)")
    _add_run_options(simulate, 50)

    holdout = sub.add_parser("holdout", help="Random train/test splits of a CSV dataset")
    _add(holdout, "data", "CSV with x_ and y_ columns")
    _add(holdout, "test-frac", "Share of rows held out (default 0.4)")
    _add(holdout, "estimators", "Estimator names (comma separated)")
    _add_run_options(holdout, 500)

    decay = sub.add_parser("decay", help="Spectral-norm error as n grows")
    _add_cell_options(decay)
    _add(decay, "n-list", "Increasing sample sizes")
    _add(decay, "estimator", "Estimator name (default I_L1)")
    _add_run_options(decay, 50)

    reproduce = sub.add_parser("reproduce-table", help="Run a published simulation table")
    reproduce.add_argument("table", type=int, choices=(1, 2, 3, 4))
    _add_run_options(reproduce, 50)
    return parser


class _Options:
    """Flag values backed by config file values and defaults."""

    def __init__(self, args: argparse.Namespace, file_values: dict[str, str]):
        self._args = args
        self._file = file_values

    def get(self, key: str, default: Any = None) -> Any:
        value = getattr(self._args, key.replace("-", "_"), None)
        if value is not None:
            return value
        if key in self._file:
            try:
                return OPTIONS[key](self._file[key])
            except ValueError as e:
                raise InvregError(f"Config value {key}={self._file[key]!r} is invalid: {e}") from e
        return default

    def require(self, key: str) -> Any:
        value = self.get(key)
        if value is None:
            raise InvregError(f"--{key} is required (as a flag or a config key)")
        return value


def _settings(opts: _Options) -> Settings:
    return get_settings().with_overrides(
        workers=opts.get("workers"),
        folds=opts.get("folds"),
        grid=opts.get("grid"),
    )


def _cell_lists(opts: _Options) -> dict[str, tuple[Any, ...]]:
    defaults = ExperimentConfig.__dataclass_fields__
    lists: dict[str, tuple[Any, ...]] = {}
    for key in _CELL_KEYS[1:]:
        field_name = key.replace("-", "_")
        value = opts.get(key)
        lists[field_name] = tuple(value) if value is not None else defaults[field_name].default
    return lists


# =============================================================================
# COMMANDS
# =============================================================================


def _default_out(name: str) -> Path:
    return Path("results") / f"{name}.csv"


def _cmd_simulate(opts: _Options) -> ExperimentReport:
    config = ExperimentConfig(
        design=opts.require("design"),
        estimators=tuple(opts.get("estimators", ["I_L1", "OLS_MP"])),
        replications=opts.get("reps", 50),
        base_seed=opts.get("seed", 0),
        **_cell_lists(opts),
    )
    return run_simulation(config, _settings(opts))


def _cmd_holdout(opts: _Options) -> ExperimentReport:
    return run_holdout_study(
        opts.require("data"),
        opts.get("estimators", ["I_L2", "OLS_MP"]),
        replications=opts.get("reps", 500),
        test_fraction=opts.get("test-frac"),
        seed=opts.get("seed", 0),
        settings=_settings(opts),
    )


def _cmd_decay(opts: _Options) -> ExperimentReport:
    design = opts.require("design")
    lists = _cell_lists(opts)
    first = {name: lists[name][0] for name in DESIGN_PARAMETERS[design]}
    cell = Cell(design, opts.require("n-list")[0], lists["p"][0], lists["q"][0], **first)
    return decay_diagnostic(
        cell,
        opts.require("n-list"),
        estimator=opts.get("estimator", "I_L1"),
        replications=opts.get("reps", 50),
        base_seed=opts.get("seed", 0),
        settings=_settings(opts),
    )


def _cmd_reproduce(opts: _Options, table: int) -> ExperimentReport:
    config = table_config(table, replications=opts.get("reps", 50), base_seed=opts.get("seed", 0))
    report = run_simulation(config, _settings(opts))
    comparison = compare_with_published(report, table)
    print(comparison.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    return report


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and write its report."""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = (args.log_level or get_log_level()).upper()
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, level, logging.INFO))

    file_values: dict[str, str] = {}
    if args.config is not None:
        file_values = load_config_file(args.config, set(COMMAND_KEYS[args.command]))
    opts = _Options(args, file_values)

    if args.command == "simulate":
        report = _cmd_simulate(opts)
        name = f"simulate-{report.provenance['config_hash']}"
    elif args.command == "holdout":
        report = _cmd_holdout(opts)
        name = f"holdout-{report.provenance['config_hash']}"
    elif args.command == "decay":
        report = _cmd_decay(opts)
        name = f"decay-{report.provenance['config_hash']}"
    else:
        report = _cmd_reproduce(opts, args.table)
        name = f"table{args.table}"

    out = opts.get("out") or _default_out(name)
    write_report(report, out)
    print(out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Console-script entry point; returns the process exit code."""
    try:
        return run(argv)
    except (InvregError, ValueError) as e:
        logger.error(f"{e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
