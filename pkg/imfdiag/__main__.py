"""Command line interface for imfdiag."""

# region #-- imports --#
from __future__ import annotations

import functools
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import asyncclick as click

from .ceemdan import CeemdanConfig, ceemdan, save_imfset
from .const import (
    DEF_BATCH_SIZE,
    DEF_DURATIONS_S,
    DEF_EPSILON,
    DEF_K,
    DEF_LR,
    DEF_MAX_EPOCHS,
    DEF_MAX_ITER,
    DEF_NR,
    DEF_PATIENCE,
    DEF_SAMPLE_RATE_HZ,
    DEF_SEED,
    DEF_SNR_FLAG,
    DEF_TRAIN_FRAC,
    DEF_VAL_FRAC,
    DEF_WINDOW_LEN,
    DEF_WINDOWS_PER_RECORD,
    NREL_CHANNELS,
    ChannelFormat,
    ExitCode,
)
from .dataset import (
    build_dataset,
    decompose_all,
    load_cache,
    load_channel,
    read_manifest,
    save_cache,
    split,
)
from .exceptions import ImfDiagError
from .logger import Logger
from .metrics import Metrics, compute_metrics
from .mscnn import ModelParams, ModelSpec, TrainConfig, fit, predict
from .report import plot_decomposition, report, write_summary
from .signal_core import SiftConfig
from .sweeps import PipelineSettings, default_grid, duration_sweep, load_grid, param_sweep
from .synthetic import write_benchmark

# endregion

_LOGGER = logging.getLogger("imfdiag.cli")
log_formatter: Logger = Logger()

click.anyio_backend = "asyncio"

_FORMATS = click.Choice([fmt.value for fmt in ChannelFormat], case_sensitive=False)


# region #-- shared options --#
def _apply(options: Sequence[Callable]) -> Callable:
    """Stack click options onto a command."""

    def decorator(func: Callable) -> Callable:
        for option in reversed(options):
            func = option(func)
        return func

    return decorator


_ceemdan_options = _apply(
    [
        click.option("--nr", default=DEF_NR, show_default=True, help="Noise realizations per stage."),
        click.option("--max-iter", default=DEF_MAX_ITER, show_default=True, help="Sift budget per decomposition."),
        click.option("--snr-flag", default=DEF_SNR_FLAG, show_default=True, type=click.IntRange(0, 1)),
        click.option("--epsilon", default=DEF_EPSILON, show_default=True, help="Noise scale."),
        click.option("--k", "k", default=DEF_K, show_default=True, help="IMFs per window."),
    ]
)

_input_options = _apply(
    [
        click.option("--format", "fmt", type=_FORMATS, default=ChannelFormat.CSV.value, show_default=True),
        click.option("--sample-rate", default=float(DEF_SAMPLE_RATE_HZ), show_default=True),
    ]
)

_train_options = _apply(
    [
        click.option("--train-frac", default=DEF_TRAIN_FRAC, show_default=True),
        click.option("--val-frac", default=DEF_VAL_FRAC, show_default=True),
        click.option("--lr", default=DEF_LR, show_default=True),
        click.option("--batch-size", default=DEF_BATCH_SIZE, show_default=True),
        click.option("--max-epochs", default=DEF_MAX_EPOCHS, show_default=True),
        click.option("--patience", default=DEF_PATIENCE, show_default=True),
    ]
)

_seed_option = click.option("--seed", default=DEF_SEED, show_default=True, type=click.IntRange(0))


def _ceemdan_config(**kwargs: Any) -> CeemdanConfig:
    """CEEMDAN settings from command options."""
    return CeemdanConfig.from_mapping(
        {key: kwargs[key] for key in ("nr", "max_iter", "snr_flag", "epsilon", "k", "seed")}
    )


def _train_config(**kwargs: Any) -> TrainConfig:
    """Training settings from command options."""
    return TrainConfig.from_mapping(
        {key: kwargs[key] for key in ("lr", "batch_size", "max_epochs", "patience", "seed")}
    )


# endregion


@click.group(invoke_without_command=True)
@click.option("-v", "--verbose", count=True)
@click.pass_context
async def cli(ctx: click.Context = None, verbose: int = 0) -> None:
    """Decompose vibration recordings and diagnose gearbox damage."""
    if verbose:
        logging.basicConfig()
        _LOGGER.setLevel(logging.DEBUG)
        if verbose > 1:
            logging.getLogger("imfdiag").setLevel(logging.DEBUG)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@_input_options
@_ceemdan_options
@_seed_option
@click.option("--output", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--plot", type=click.Path(dir_okay=False, path_type=Path), help="Also write an SVG of the IMFs.")
async def decompose(
    input_path: Path, fmt: str, sample_rate: float, output: Path, plot: Path | None, **kwargs: Any
) -> None:
    """Decompose one channel file into K IMFs and a residual."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    cfg = _ceemdan_config(**kwargs)
    signal = load_channel(input_path, fmt=fmt, sample_rate_hz=sample_rate)
    imfset = ceemdan(signal, cfg, SiftConfig())
    save_imfset(imfset, output)
    if plot is not None:
        plot_decomposition(signal, imfset, plot)

    _display_data(
        _build_display_data(
            mappings=[
                ("source_length", "Samples"),
                ("k", "IMFs"),
                ("sift_iterations", "Sift iterations"),
                ("output", "Output", output),
            ],
            obj=imfset,
            title=str(input_path),
        )
    )
    _LOGGER.debug(log_formatter.format("exited"))


@cli.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_input_options
@click.option("--window-len", default=DEF_WINDOW_LEN, show_default=True)
@click.option("--windows-per-record", default=DEF_WINDOWS_PER_RECORD, show_default=True)
@_ceemdan_options
@_seed_option
@click.option("--workers", default=1, show_default=True, type=click.IntRange(1))
@click.option("--cache-dir", required=True, type=click.Path(file_okay=False, path_type=Path))
async def preprocess(
    manifest: Path,
    fmt: str,
    sample_rate: float,
    window_len: int,
    windows_per_record: int,
    workers: int,
    cache_dir: Path,
    **kwargs: Any,
) -> None:
    """Window, label, shuffle and decompose every recording into a cache."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    cfg = _ceemdan_config(**kwargs)
    records = read_manifest(manifest, fmt=fmt, sample_rate_hz=sample_rate)
    dataset = build_dataset(records, window_len, windows_per_record, cfg.seed)
    dataset = decompose_all(dataset, cfg, SiftConfig(), workers=workers)
    save_cache(dataset, cache_dir)

    healthy, damaged = dataset.class_counts()
    _display_data(f"{len(dataset)} windows ({healthy} healthy / {damaged} damaged) -> {cache_dir}")
    _LOGGER.debug(log_formatter.format("exited"))


@cli.command()
@click.option("--cache-dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@_train_options
@_seed_option
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--report", "report_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
async def train(
    cache_dir: Path,
    train_frac: float,
    val_frac: float,
    checkpoint: Path,
    report_dir: Path,
    **kwargs: Any,
) -> None:
    """Train the multiscale CNN on a decomposed cache."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    cfg = _train_config(**kwargs)
    dataset = load_cache(cache_dir)
    train_ds, val_ds, test_ds = split(dataset, train_frac, val_frac)
    spec = ModelSpec(k_branches=dataset.samples[0].k, input_len=dataset.window_len)

    with click.progressbar(
        label="Training", length=cfg.max_epochs, show_eta=False, show_percent=True
    ) as pbar:
        params, history = fit(train_ds, val_ds, spec, cfg, on_epoch=lambda _record: pbar.update(1))
    params.save(checkpoint)

    labels, _, seconds_per_sample = predict(params, test_ds)
    metrics = compute_metrics(labels, test_ds.labels, history.seconds_per_epoch, seconds_per_sample)
    report(history, metrics, report_dir)
    write_summary(spec, Path(report_dir) / "summary.txt")

    _display_data(f"best epoch {history.best_epoch} of {len(history)}")
    _display_metrics(metrics)
    _LOGGER.debug(log_formatter.format("exited"))


@cli.command()
@click.option("--cache-dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--report", "report_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--train-frac", default=DEF_TRAIN_FRAC, show_default=True)
@click.option("--val-frac", default=DEF_VAL_FRAC, show_default=True)
@click.option("--all", "use_all", is_flag=True, help="Score every cached window, not just the test split.")
async def evaluate(
    cache_dir: Path, checkpoint: Path, report_dir: Path, train_frac: float, val_frac: float, use_all: bool
) -> None:
    """Score a checkpoint on the held-out test split of a cache."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    params = ModelParams.load(checkpoint)
    dataset = load_cache(cache_dir)
    if not use_all:
        _, _, dataset = split(dataset, train_frac, val_frac)

    labels, _, seconds_per_sample = predict(params, dataset)
    metrics = compute_metrics(labels, dataset.labels, test_seconds_per_sample=seconds_per_sample)
    report(None, metrics, report_dir)

    _display_metrics(metrics)
    _LOGGER.debug(log_formatter.format("exited"))


@cli.group()
async def sweep() -> None:
    """Run one of the experiment sweeps."""


def _sweep_options(func: Callable) -> Callable:
    """Options shared by both sweeps."""
    return _apply(
        [
            click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path)),
            click.option("--report", "report_dir", required=True, type=click.Path(file_okay=False, path_type=Path)),
            click.option("--windows-per-record", default=DEF_WINDOWS_PER_RECORD, show_default=True),
            click.option("--workers", default=1, show_default=True, type=click.IntRange(1)),
        ]
    )(_input_options(_train_options(_seed_option(func))))


def _settings(window_len: int, windows_per_record: int, ceemdan_cfg: CeemdanConfig, **kwargs: Any) -> PipelineSettings:
    """Pipeline settings for a sweep from command options."""
    return PipelineSettings(
        spec=ModelSpec(k_branches=ceemdan_cfg.k, input_len=window_len),
        train_cfg=_train_config(**kwargs),
        ceemdan_cfg=ceemdan_cfg,
        sift_cfg=SiftConfig(),
        window_len=window_len,
        windows_per_record=windows_per_record,
        train_frac=kwargs["train_frac"],
        val_frac=kwargs["val_frac"],
    )


@sweep.command(name="params")
@_sweep_options
@click.option("--grid", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="CSV of nr,max_iter,snr_flag rows.")
@click.option("--window-len", default=DEF_WINDOW_LEN, show_default=True)
@click.option("--epsilon", default=DEF_EPSILON, show_default=True)
@click.option("--k", "k", default=DEF_K, show_default=True)
async def sweep_params(
    manifest: Path,
    report_dir: Path,
    windows_per_record: int,
    workers: int,
    fmt: str,
    sample_rate: float,
    grid: Path | None,
    window_len: int,
    epsilon: float,
    k: int,
    **kwargs: Any,
) -> None:
    """Validation accuracy across CEEMDAN settings."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    base = CeemdanConfig(epsilon=epsilon, k=k, seed=kwargs["seed"])
    configs = load_grid(grid, base) if grid is not None else default_grid(base)
    settings = _settings(window_len, windows_per_record, base, **kwargs)
    records = read_manifest(manifest, fmt=fmt, sample_rate_hz=sample_rate)

    Path(report_dir).mkdir(parents=True, exist_ok=True)
    with click.progressbar(label="Grid", length=len(configs), show_eta=False) as pbar:
        rows = param_sweep(
            records,
            configs,
            settings,
            results_path=Path(report_dir) / "sweep.csv",
            workers=workers,
            on_cell=lambda _row: pbar.update(1),
        )
    report(None, None, report_dir, param_rows=rows)

    for row in rows:
        _display_data(f"NR={row.nr} MaxIter={row.max_iter} SNRFlag={row.snr_flag}: {row.val_acc:.4f} ({row.status})")
    _LOGGER.debug(log_formatter.format("exited"))


def _durations(_ctx: click.Context, _param: click.Parameter, value: str) -> list[float]:
    """Parse a comma-separated list of seconds."""
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as err:
        raise click.BadParameter(str(err)) from err


@sweep.command(name="duration")
@_sweep_options
@click.option(
    "--durations",
    default=",".join(f"{d:.2f}" for d in DEF_DURATIONS_S),
    show_default=True,
    callback=_durations,
)
@_ceemdan_options
async def sweep_duration(
    manifest: Path,
    report_dir: Path,
    windows_per_record: int,
    workers: int,
    fmt: str,
    sample_rate: float,
    durations: list[float],
    **kwargs: Any,
) -> None:
    """Held-out accuracy and F1 across input durations."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    ceemdan_cfg = _ceemdan_config(**kwargs)
    settings = _settings(DEF_WINDOW_LEN, windows_per_record, ceemdan_cfg, **kwargs)
    records = read_manifest(manifest, fmt=fmt, sample_rate_hz=sample_rate)

    Path(report_dir).mkdir(parents=True, exist_ok=True)
    with click.progressbar(label="Durations", length=len(durations), show_eta=False) as pbar:
        rows = duration_sweep(
            records,
            durations,
            settings,
            results_path=Path(report_dir) / "sweep.csv",
            workers=workers,
            on_cell=lambda _row: pbar.update(1),
        )
    report(None, None, report_dir, duration_rows=rows)

    for row in rows:
        _display_data(f"{row.duration_s:.2f} s ({row.window_len} samples): accuracy {row.accuracy:.4f}, F1 {row.f1:.4f} ({row.status})")
    _LOGGER.debug(log_formatter.format("exited"))


@cli.command()
@click.option("--out-dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--records-per-class", default=10, show_default=True, type=click.IntRange(1))
@click.option("--channels", default=NREL_CHANNELS[0], show_default=True, help="Comma-separated channel ids.")
@click.option("--duration", default=5.0, show_default=True, help="Seconds per recording.")
@click.option("--sample-rate", default=float(DEF_SAMPLE_RATE_HZ), show_default=True)
@click.option("--format", "fmt", type=_FORMATS, default=ChannelFormat.CSV.value, show_default=True)
@_seed_option
async def synth(
    out_dir: Path, records_per_class: int, channels: str, duration: float, sample_rate: float, fmt: str, seed: int
) -> None:
    """Write a surrogate healthy/damaged benchmark with its manifest."""
    _LOGGER.debug(log_formatter.format("entered, args: %s"), locals())

    manifest = write_benchmark(
        out_dir,
        records_per_class=records_per_class,
        channels=[channel.strip() for channel in channels.split(",") if channel.strip()],
        duration_s=duration,
        sample_rate_hz=sample_rate,
        seed=seed,
        fmt=fmt,
    )
    _display_data(str(manifest))
    _LOGGER.debug(log_formatter.format("exited"))


def _build_display_data(
    mappings: list[tuple],
    obj: Any,
    indent: int = 0,
    title: str = "",
) -> str:
    """Build the string to display the given data."""
    ret: str = ""
    if title:
        ret = f"{title}\n"
        ret += f"{len(title) * '-'}\n"

    for properties in mappings:
        try:
            property_name, display_name, display_value = properties
        except ValueError:
            display_value = None
            property_name, display_name = properties

        if display_value is None:
            if isinstance(obj, dict):
                display_value = obj.get(property_name)
            else:
                display_value = getattr(obj, property_name, None)

        ret += f"{indent * ' '}{display_name}: {display_value}\n"

    return ret.rstrip()


def _display_data(message: str = "") -> None:
    """Display the given data on screen."""
    click.echo(message)


def _display_metrics(metrics: Metrics) -> None:
    """Show the scores of an evaluation."""
    _display_data(
        _build_display_data(
            mappings=[
                ("n", "Samples"),
                ("tp", "True positives (damaged)"),
                ("fp", "False positives"),
                ("tn", "True negatives"),
                ("fn", "False negatives"),
                ("accuracy", "Accuracy"),
                ("precision", "Precision"),
                ("recall", "Recall"),
                ("f1", "F1"),
                ("train_seconds_per_epoch", "Train s/epoch"),
                ("test_ms_per_sample", "Test ms/sample"),
            ],
            obj=metrics,
            title="Metrics",
        )
    )


def _exit_code(func: Callable[..., Any]) -> Callable[..., int]:
    """Translate exceptions into the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        """Wrap the required function."""
        try:
            ret = func(*args, **kwargs)
        except click.ClickException as err:
            err.show()
            return ExitCode.USAGE.value
        except click.Abort:
            click.echo("Aborted!", err=True)
            return ExitCode.USAGE.value
        except ImfDiagError as err:
            click.echo(f"Error: {err}", err=True)
            return err.exit_code.value
        return ret if isinstance(ret, int) else ExitCode.SUCCESS.value

    return wrapper


@_exit_code
def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code."""
    return cli(list(sys.argv[1:] if argv is None else argv), prog_name="imfdiag", standalone_mode=False)


if __name__ == "__main__":
    sys.exit(main())
