"""Report files: metrics and history tables, loss, confusion and sweep figures."""

# region #-- imports --#
from __future__ import annotations

import csv
import dataclasses
import logging
import os
from collections.abc import Sequence
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .ceemdan import IMFSet
from .const import HISTORY_CSV_COLUMNS
from .exceptions import DataError, ParseError
from .logger import Logger
from .metrics import Metrics
from .mscnn import EpochRecord, ModelSpec, TrainHistory
from .signal_core import Signal
from .sweeps import STATUS_OK, DurationSweepRow, ParamSweepRow, write_duration_rows, write_param_rows

# endregion

_LOGGER = logging.getLogger(__name__)
log_formatter: Logger = Logger()

METRICS_CSV_COLUMNS: tuple[str, ...] = tuple(field.name for field in dataclasses.fields(Metrics))

# every data point is kept as a path vertex; no font or hash randomness in the markup
_SVG_STYLE = {"path.simplify": False, "svg.fonttype": "none", "svg.hashsalt": "imfdiag"}


def _save_svg(fig: Figure, path: Path) -> Path:
    """Render a figure to a static SVG file."""
    with matplotlib.rc_context(_SVG_STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


# region #-- tables --#
def write_metrics_csv(metrics: Metrics, path: str | os.PathLike) -> Path:
    """One header row and one value row; floats written with ``repr``."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow((*METRICS_CSV_COLUMNS, "n"))
        writer.writerow(
            (*(repr(getattr(metrics, column)) for column in METRICS_CSV_COLUMNS), metrics.n)
        )
    return path


def read_metrics_csv(path: str | os.PathLike) -> Metrics:
    """Parse a file written by :func:`write_metrics_csv`."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    if len(rows) != 1:
        raise ParseError(path, "line 2", f"Expected one metrics row, found {len(rows)}")
    try:
        values = {
            field.name: (int if field.type in ("int", int) else float)(rows[0][field.name])
            for field in dataclasses.fields(Metrics)
        }
    except (KeyError, ValueError) as err:
        raise ParseError(path, "line 2", str(err)) from err
    return Metrics(**values)


def write_history_csv(history: TrainHistory, path: str | os.PathLike) -> Path:
    """``epoch,train_loss,val_loss,val_acc,seconds`` per epoch."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTORY_CSV_COLUMNS)
        for record in history.epochs:
            writer.writerow(
                (record.epoch, *(repr(getattr(record, c)) for c in HISTORY_CSV_COLUMNS[1:]))
            )
    return path


def read_history_csv(path: str | os.PathLike) -> list[EpochRecord]:
    """Parse a file written by :func:`write_history_csv`."""
    path = Path(path)
    records = []
    with path.open(encoding="utf-8", newline="") as handle:
        for line_no, row in enumerate(csv.DictReader(handle), start=2):
            try:
                records.append(
                    EpochRecord(
                        epoch=int(row["epoch"]),
                        train_loss=float(row["train_loss"]),
                        val_loss=float(row["val_loss"]),
                        val_acc=float(row["val_acc"]),
                        seconds=float(row["seconds"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as err:
                raise ParseError(path, f"line {line_no}", str(err)) from err
    return records


# endregion


# region #-- figures --#
def plot_loss(history: TrainHistory, path: str | os.PathLike) -> Path:
    """Training and validation loss per epoch, best epoch marked."""
    epochs = [record.epoch for record in history.epochs]
    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot()
    ax.plot(epochs, history.train_loss, label="train loss", gid="train_loss")
    ax.plot(epochs, history.val_loss, label="validation loss", gid="val_loss")
    if history.best_epoch:
        ax.axvline(history.best_epoch, color="grey", linestyle=":", label=f"best epoch {history.best_epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy loss")
    ax.set_title("Training history")
    ax.legend()
    fig.tight_layout()
    return _save_svg(fig, Path(path))


def plot_confusion(metrics: Metrics, path: str | os.PathLike) -> Path:
    """2x2 confusion matrix, rows actual, columns predicted."""
    matrix = np.array([[metrics.tn, metrics.fp], [metrics.fn, metrics.tp]])
    fig = Figure(figsize=(4, 4))
    ax = fig.add_subplot()
    ax.imshow(matrix, cmap="Blues")
    for (row, col), count in np.ndenumerate(matrix):
        colour = "white" if count > matrix.max() / 2 else "black"
        ax.text(col, row, str(count), ha="center", va="center", color=colour)
    ax.set_xticks([0, 1], labels=["healthy", "damaged"])
    ax.set_yticks([0, 1], labels=["healthy", "damaged"])
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(f"accuracy {metrics.accuracy:.4f}, F1 {metrics.f1:.4f}")
    fig.tight_layout()
    return _save_svg(fig, Path(path))


def plot_param_sweep(rows: Sequence[ParamSweepRow], path: str | os.PathLike) -> Path:
    """Bar chart of validation accuracy per grid row."""
    labels = [f"{row.nr}/{row.max_iter}/{row.snr_flag}" for row in rows]
    values = [row.val_acc if row.status == STATUS_OK else 0.0 for row in rows]
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    ax.bar(range(len(rows)), values, gid="val_acc")
    ax.set_xticks(range(len(rows)), labels=labels, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_xlabel("NR / MaxIter / SNRFlag")
    ax.set_ylabel("validation accuracy")
    ax.set_title("Decomposition parameter sweep")
    fig.tight_layout()
    return _save_svg(fig, Path(path))


def plot_duration_sweep(rows: Sequence[DurationSweepRow], path: str | os.PathLike) -> Path:
    """Accuracy and F1 against input duration."""
    ok = [row for row in rows if row.status == STATUS_OK]
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.plot([r.duration_s for r in ok], [r.accuracy for r in ok], marker="o", label="accuracy", gid="accuracy")
    ax.plot([r.duration_s for r in ok], [r.f1 for r in ok], marker="s", label="F1", gid="f1")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("duration (s)")
    ax.set_ylabel("score")
    ax.set_title("Input duration sweep")
    ax.legend()
    fig.tight_layout()
    return _save_svg(fig, Path(path))


def plot_decomposition(signal: Signal, imfset: IMFSet, path: str | os.PathLike) -> Path:
    """Input, every IMF and the residual stacked over a shared time axis."""
    rows = [("input", signal.samples)]
    rows += [(f"IMF {idx + 1}", imf) for idx, imf in enumerate(imfset.imfs)]
    rows.append(("residual", imfset.residual))
    t = np.arange(len(signal)) / signal.sample_rate_hz

    fig = Figure(figsize=(8, 1.2 * len(rows)))
    axes = fig.subplots(len(rows), 1, sharex=True)
    for ax, (label, values) in zip(axes, rows):
        ax.plot(t, values, linewidth=0.6, gid=label.lower().replace(" ", ""))
        ax.set_ylabel(label, rotation=0, ha="right", va="center")
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    return _save_svg(fig, Path(path))


# endregion


def write_summary(spec: ModelSpec, path: str | os.PathLike) -> Path:
    """Layer table of the model."""
    path = Path(path)
    path.write_text(spec.summary() + "\n", encoding="utf-8")
    return path


def report(
    history: TrainHistory | None,
    metrics: Metrics | None,
    out_dir: str | os.PathLike,
    param_rows: Sequence[ParamSweepRow] | None = None,
    duration_rows: Sequence[DurationSweepRow] | None = None,
) -> list[Path]:
    """Write every applicable report file into ``out_dir``; return their paths."""
    out_dir = Path(out_dir)
    _LOGGER.debug(log_formatter.format("entered, %s"), out_dir)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if metrics is not None:
            written.append(write_metrics_csv(metrics, out_dir / "metrics.csv"))
            written.append(plot_confusion(metrics, out_dir / "confusion.svg"))
        if history is not None and len(history):
            written.append(write_history_csv(history, out_dir / "history.csv"))
            written.append(plot_loss(history, out_dir / "loss.svg"))
        if param_rows:
            write_param_rows(param_rows, out_dir / "sweep.csv")
            written.append(out_dir / "sweep.csv")
            written.append(plot_param_sweep(param_rows, out_dir / "sweep.svg"))
        if duration_rows:
            write_duration_rows(duration_rows, out_dir / "sweep.csv")
            written.append(out_dir / "sweep.csv")
            written.append(plot_duration_sweep(duration_rows, out_dir / "sweep.svg"))
    except OSError as err:
        raise DataError(f"Cannot write report: {err.strerror}", context=err.filename or out_dir) from err

    _LOGGER.debug(log_formatter.format("exited, %d files"), len(written))
    return written
