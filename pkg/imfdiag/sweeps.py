"""Decomposition-parameter and signal-duration experiment sweeps.

Each cell (one grid row, or one duration) runs the whole pipeline:
window, decompose, split, train and score. Cells are independent and may run
in worker processes; results are written by the calling process only, after
every finished cell, so an interrupted sweep resumes where it stopped.
"""

# region #-- imports --#
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import voluptuous as vol

from .ceemdan import CeemdanConfig
from .const import (
    DEF_DURATIONS_S,
    DEF_PARAM_GRID,
    DEF_TRAIN_FRAC,
    DEF_VAL_FRAC,
    DEF_WINDOW_LEN,
    DEF_WINDOWS_PER_RECORD,
    MIN_INPUT_LEN,
)
from .dataset import RawRecord, build_dataset, decompose_all, split
from .exceptions import ConfigError, ImfDiagError, ParseError
from .logger import Logger
from .metrics import Metrics, compute_metrics
from .mscnn import ModelSpec, TrainConfig, fit, predict
from .signal_core import SiftConfig

# endregion

_LOGGER = logging.getLogger(__name__)

PARAM_COLUMNS: tuple[str, ...] = ("nr", "max_iter", "snr_flag", "val_acc", "status")
DURATION_COLUMNS: tuple[str, ...] = ("duration_s", "window_len", "accuracy", "f1", "status")
STATUS_OK: str = "ok"

GRID_ROW_SCHEMA = vol.Schema(
    {
        vol.Required("nr"): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("max_iter"): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("snr_flag"): vol.All(vol.Coerce(int), vol.In((0, 1))),
    },
    extra=vol.ALLOW_EXTRA,
)


@dataclasses.dataclass(frozen=True)
class PipelineSettings:
    """Everything a sweep cell needs besides the swept value."""

    spec: ModelSpec
    train_cfg: TrainConfig
    ceemdan_cfg: CeemdanConfig = dataclasses.field(default_factory=CeemdanConfig)
    sift_cfg: SiftConfig = dataclasses.field(default_factory=SiftConfig)
    window_len: int = DEF_WINDOW_LEN
    windows_per_record: int = DEF_WINDOWS_PER_RECORD
    train_frac: float = DEF_TRAIN_FRAC
    val_frac: float = DEF_VAL_FRAC


@dataclasses.dataclass(frozen=True)
class ParamSweepRow:
    """Best validation accuracy for one decomposition setting."""

    nr: int
    max_iter: int
    snr_flag: int
    val_acc: float = math.nan
    status: str = STATUS_OK

    @property
    def key(self) -> tuple[int, int, int]:
        """Grid coordinates."""
        return self.nr, self.max_iter, self.snr_flag


@dataclasses.dataclass(frozen=True)
class DurationSweepRow:
    """Held-out scores for one input duration."""

    duration_s: float
    window_len: int
    accuracy: float = math.nan
    f1: float = math.nan
    status: str = STATUS_OK
    metrics: Metrics | None = dataclasses.field(default=None, compare=False)


# region #-- grids --#
def default_grid(base: CeemdanConfig | None = None) -> list[CeemdanConfig]:
    """The eight published tuning rows on top of ``base``."""
    base = base or CeemdanConfig()
    return [
        dataclasses.replace(base, nr=nr, max_iter=max_iter, snr_flag=snr_flag)
        for nr, max_iter, snr_flag in DEF_PARAM_GRID
    ]


def load_grid(path: str | os.PathLike, base: CeemdanConfig | None = None) -> list[CeemdanConfig]:
    """Read ``nr,max_iter,snr_flag`` rows (header required) into configs."""
    path = Path(path)
    base = base or CeemdanConfig()
    grid: list[CeemdanConfig] = []
    with path.open(encoding="utf-8", newline="") as handle:
        for line_no, row in enumerate(csv.DictReader(handle), start=2):
            try:
                entry = GRID_ROW_SCHEMA({key.strip(): value.strip() for key, value in row.items() if key})
                grid.append(CeemdanConfig.from_mapping({**dataclasses.asdict(base), **entry}))
            except (vol.Invalid, ConfigError) as err:
                raise ParseError(path, f"line {line_no}", str(err)) from err
    if not grid:
        raise ParseError(path, "line 2", "Grid has no rows")
    return grid


def window_length(duration_s: float, sample_rate_hz: float) -> int:
    """Samples in ``duration_s``; must be a whole number of at least the network minimum."""
    exact = duration_s * sample_rate_hz
    samples = round(exact)
    if abs(exact - samples) > 1e-6 * max(1.0, exact):
        raise ConfigError("Duration is not a whole number of samples", context=duration_s)
    if samples < MIN_INPUT_LEN:
        raise ConfigError(f"Duration gives fewer than {MIN_INPUT_LEN} samples", context=duration_s)
    return int(samples)


# endregion


# region #-- results files --#
def _format(value: Any) -> str:
    """Text form that reparses to the same value."""
    return repr(value) if isinstance(value, float) else str(value)


def write_param_rows(rows: Sequence[ParamSweepRow], path: str | os.PathLike) -> None:
    """Write the parameter sweep table."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(PARAM_COLUMNS)
        for row in rows:
            writer.writerow(_format(getattr(row, column)) for column in PARAM_COLUMNS)


def read_param_rows(path: str | os.PathLike) -> list[ParamSweepRow]:
    """Read a table written by :func:`write_param_rows`."""
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8", newline="") as handle:
        for line_no, row in enumerate(csv.DictReader(handle), start=2):
            try:
                rows.append(
                    ParamSweepRow(
                        nr=int(row["nr"]),
                        max_iter=int(row["max_iter"]),
                        snr_flag=int(row["snr_flag"]),
                        val_acc=float(row["val_acc"]),
                        status=row["status"],
                    )
                )
            except (KeyError, TypeError, ValueError) as err:
                raise ParseError(path, f"line {line_no}", str(err)) from err
    return rows


def write_duration_rows(rows: Sequence[DurationSweepRow], path: str | os.PathLike) -> None:
    """Write the duration sweep table."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(DURATION_COLUMNS)
        for row in rows:
            writer.writerow(_format(getattr(row, column)) for column in DURATION_COLUMNS)


def read_duration_rows(path: str | os.PathLike) -> list[DurationSweepRow]:
    """Read a table written by :func:`write_duration_rows`."""
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8", newline="") as handle:
        for line_no, row in enumerate(csv.DictReader(handle), start=2):
            try:
                rows.append(
                    DurationSweepRow(
                        duration_s=float(row["duration_s"]),
                        window_len=int(row["window_len"]),
                        accuracy=float(row["accuracy"]),
                        f1=float(row["f1"]),
                        status=row["status"],
                    )
                )
            except (KeyError, TypeError, ValueError) as err:
                raise ParseError(path, f"line {line_no}", str(err)) from err
    return rows


# endregion


# region #-- cells --#
def _param_cell(
    records: Sequence[RawRecord], ceemdan_cfg: CeemdanConfig, settings: PipelineSettings
) -> ParamSweepRow:
    """Decompose, split and train for one grid row."""
    row = ParamSweepRow(ceemdan_cfg.nr, ceemdan_cfg.max_iter, ceemdan_cfg.snr_flag)
    log_formatter = Logger(unique_id=f"nr={row.nr} max_iter={row.max_iter} snr_flag={row.snr_flag}")
    try:
        ds = build_dataset(
            records, settings.window_len, settings.windows_per_record, settings.train_cfg.seed
        )
        ds = decompose_all(ds, ceemdan_cfg, settings.sift_cfg)
        train, val, _ = split(ds, settings.train_frac, settings.val_frac)
        spec = dataclasses.replace(
            settings.spec, k_branches=ceemdan_cfg.k, input_len=settings.window_len
        )
        _, history = fit(train, val, spec, settings.train_cfg)
    except ImfDiagError as err:
        _LOGGER.warning(log_formatter.format("failed: %s"), err)
        return dataclasses.replace(row, status=str(err))

    _LOGGER.info(log_formatter.format("validation accuracy %.4f"), history.best_val_acc)
    return dataclasses.replace(row, val_acc=history.best_val_acc)


def _duration_cell(
    records: Sequence[RawRecord], duration_s: float, settings: PipelineSettings
) -> DurationSweepRow:
    """Re-window at the duration, then decompose, retrain and test."""
    log_formatter = Logger(unique_id=f"duration={duration_s}")
    sample_rate_hz = records[0].signal.sample_rate_hz
    try:
        window_len = window_length(duration_s, sample_rate_hz)
    except ConfigError as err:
        _LOGGER.warning(log_formatter.format("skipped: %s"), err)
        return DurationSweepRow(duration_s, 0, status=str(err))

    row = DurationSweepRow(duration_s, window_len)
    try:
        ds = build_dataset(records, window_len, settings.windows_per_record, settings.train_cfg.seed)
        ds = decompose_all(ds, settings.ceemdan_cfg, settings.sift_cfg)
        train, val, test = split(ds, settings.train_frac, settings.val_frac)
        spec = dataclasses.replace(
            settings.spec, k_branches=settings.ceemdan_cfg.k, input_len=window_len
        )
        params, history = fit(train, val, spec, settings.train_cfg)
        labels, _, seconds_per_sample = predict(params, test)
        metrics = compute_metrics(labels, test.labels, history.seconds_per_epoch, seconds_per_sample)
    except ImfDiagError as err:
        _LOGGER.warning(log_formatter.format("failed: %s"), err)
        return dataclasses.replace(row, status=str(err))

    _LOGGER.info(log_formatter.format("accuracy %.4f, f1 %.4f"), metrics.accuracy, metrics.f1)
    return dataclasses.replace(row, accuracy=metrics.accuracy, f1=metrics.f1, metrics=metrics)


def _run_cells(
    cell: Callable[..., Any], records: Sequence[RawRecord], values: Sequence[Any], settings: PipelineSettings, workers: int
):
    """Yield ``(value, result)`` in input order, serially or from a process pool."""
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(cell, records, value, settings) for value in values]
            for value, future in zip(values, futures):
                yield value, future.result()
    else:
        for value in values:
            yield value, cell(records, value, settings)


# endregion


def param_sweep(
    records: Sequence[RawRecord],
    grid: Sequence[CeemdanConfig],
    settings: PipelineSettings,
    results_path: str | os.PathLike | None = None,
    workers: int = 1,
    on_cell: Callable[[ParamSweepRow], None] | None = None,
) -> list[ParamSweepRow]:
    """Validation accuracy for every grid row, in grid order.

    Rows already completed in ``results_path`` are reused, repeated grid rows
    are trained once, and the table is rewritten after every finished cell.
    """
    log_formatter = Logger(prefix="param sweep: ")
    _LOGGER.debug(log_formatter.format("entered, %d grid rows"), len(grid))

    done: dict[tuple[int, int, int], ParamSweepRow] = {}
    if results_path is not None and Path(results_path).is_file():
        done = {row.key: row for row in read_param_rows(results_path) if row.status == STATUS_OK}
        _LOGGER.debug(log_formatter.format("resuming with %d completed cells"), len(done))

    pending: dict[tuple[int, int, int], CeemdanConfig] = {}
    for cfg in grid:
        key = (cfg.nr, cfg.max_iter, cfg.snr_flag)
        if key not in done:
            pending.setdefault(key, cfg)

    def table() -> list[ParamSweepRow]:
        """Rows known so far, in grid order."""
        keys = [(cfg.nr, cfg.max_iter, cfg.snr_flag) for cfg in grid]
        return [done[key] for key in keys if key in done]

    for cfg, row in _run_cells(_param_cell, records, list(pending.values()), settings, workers):
        done[(cfg.nr, cfg.max_iter, cfg.snr_flag)] = row
        if results_path is not None:
            write_param_rows(table(), results_path)
        if on_cell is not None:
            on_cell(row)

    rows = table()
    if results_path is not None:
        write_param_rows(rows, results_path)
    _LOGGER.debug(log_formatter.format("exited"))
    return rows


def duration_sweep(
    records: Sequence[RawRecord],
    durations: Sequence[float] = DEF_DURATIONS_S,
    settings: PipelineSettings | None = None,
    results_path: str | os.PathLike | None = None,
    workers: int = 1,
    on_cell: Callable[[DurationSweepRow], None] | None = None,
) -> list[DurationSweepRow]:
    """Held-out accuracy and F1 per duration, retraining a model for each."""
    log_formatter = Logger(prefix="duration sweep: ")
    _LOGGER.debug(log_formatter.format("entered, %d durations"), len(durations))
    if settings is None:
        settings = PipelineSettings(spec=ModelSpec(), train_cfg=TrainConfig())

    done: dict[float, DurationSweepRow] = {}
    if results_path is not None and Path(results_path).is_file():
        done = {
            row.duration_s: row for row in read_duration_rows(results_path) if row.status == STATUS_OK
        }
        _LOGGER.debug(log_formatter.format("resuming with %d completed cells"), len(done))

    pending = list(dict.fromkeys(d for d in durations if float(d) not in done))

    def table() -> list[DurationSweepRow]:
        """Rows known so far, in duration order."""
        return [done[float(d)] for d in durations if float(d) in done]

    for duration, row in _run_cells(_duration_cell, records, pending, settings, workers):
        done[float(duration)] = row
        if results_path is not None:
            write_duration_rows(table(), results_path)
        if on_cell is not None:
            on_cell(row)

    rows = table()
    if results_path is not None:
        write_duration_rows(rows, results_path)
    _LOGGER.debug(log_formatter.format("exited"))
    return rows
