"""Recording ingestion, windowing, labelling, splitting and batch decomposition."""

# region #-- imports --#
from __future__ import annotations

import csv
import dataclasses
import logging
import os
import struct
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path, PurePath

import numpy as np
import voluptuous as vol

from .ceemdan import CeemdanConfig, IMFSet, ceemdan, derive_seed, load_imfset, save_imfset
from .const import (
    CACHE_INDEX_FILENAME,
    CHANNEL_HEADER_FORMAT,
    CHANNEL_MAGIC,
    DEF_SAMPLE_RATE_HZ,
    DEF_TRAIN_FRAC,
    DEF_VAL_FRAC,
    U64_MASK,
    ChannelFormat,
    Condition,
)
from .exceptions import (
    ConfigError,
    DataError,
    DatasetStateError,
    DecompositionError,
    EmptyPartitionError,
    ImfDiagError,
    NonFiniteError,
    ParseError,
    ShapeError,
    SignalTooShortError,
)
from .logger import Logger
from .signal_core import Signal, SiftConfig

# endregion

_LOGGER = logging.getLogger(__name__)
log_formatter: Logger = Logger()

MANIFEST_ROW_SCHEMA = vol.Schema(
    {
        vol.Required("path"): vol.All(str, vol.Length(min=1)),
        vol.Required("channel_id"): vol.All(str, vol.Length(min=1)),
        vol.Required("condition"): vol.All(vol.Lower, vol.Coerce(Condition)),
    }
)


def _test_share_left(data: dict) -> dict:
    """Reject splits that leave no test share."""
    if data["train_frac"] + data["val_frac"] >= 1:
        raise vol.Invalid("train_frac + val_frac must be below 1")
    return data


_FRACTION = vol.All(
    vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False)
)
SPLIT_SCHEMA = vol.Schema(
    vol.All(
        {vol.Required("train_frac"): _FRACTION, vol.Required("val_frac"): _FRACTION},
        _test_share_left,
    )
)


# region #-- types --#
@dataclasses.dataclass(frozen=True)
class Provenance:
    """Where a window came from."""

    file: str
    channel: str
    window_index: int

    def __str__(self) -> str:
        """Compact identifier used in logs and cache names."""
        return f"{self.file}_{self.channel}_{self.window_index}"


@dataclasses.dataclass(frozen=True, eq=False)
class RawRecord:
    """One channel of one recording with its gearbox condition."""

    channel_id: str
    condition: Condition
    signal: Signal
    source: str = ""

    @property
    def label(self) -> int:
        """Class label of the recording."""
        return Condition(self.condition).label


@dataclasses.dataclass(frozen=True, eq=False)
class WindowedDataset:
    """Labelled windows, raw or decomposed, in a fixed (shuffled) order."""

    samples: tuple[np.ndarray | IMFSet, ...]
    labels: np.ndarray
    window_len: int
    decomposed: bool
    provenance: tuple[Provenance, ...]
    sample_rate_hz: float = DEF_SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        """Validate that samples, labels and provenance line up."""
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if not len(self.samples) == labels.size == len(self.provenance):
            raise ShapeError(
                "WindowedDataset",
                expected=len(self.samples),
                actual=(labels.size, len(self.provenance)),
            )
        if np.any((labels != 0) & (labels != 1)):
            raise DataError("Labels must be 0 or 1")
        for sample in self.samples:
            length = sample.source_length if isinstance(sample, IMFSet) else np.size(sample)
            if isinstance(sample, IMFSet) != self.decomposed or length != self.window_len:
                raise ShapeError("WindowedDataset", expected=self.window_len, actual=length)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        """Number of samples."""
        return len(self.samples)

    def subset(self, indices: Iterable[int]) -> WindowedDataset:
        """Samples at ``indices``, in that order."""
        indices = list(indices)
        return dataclasses.replace(
            self,
            samples=tuple(self.samples[i] for i in indices),
            labels=self.labels[indices] if indices else np.empty(0, dtype=np.int64),
            provenance=tuple(self.provenance[i] for i in indices),
        )

    def imf_stack(self) -> np.ndarray:
        """All IMF rows as an array of shape (n, K, L)."""
        if not self.decomposed:
            raise DatasetStateError(expected_decomposed=True)
        return np.stack([sample.imfs for sample in self.samples])

    def class_counts(self) -> tuple[int, int]:
        """Number of healthy and damaged samples."""
        damaged = int(self.labels.sum())
        return len(self) - damaged, damaged


# endregion


# region #-- channel files --#
def _load_csv(path: Path) -> np.ndarray:
    """Read one real per line, reporting the first bad line."""
    try:
        return np.loadtxt(path, dtype=np.float64, ndmin=1)
    except ValueError:
        pass

    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                float(line)
            except ValueError as err:
                raise ParseError(path, f"line {line_no}", f"Not a number: {line.strip()!r}") from err
    raise ParseError(path, "unknown line", "Unparseable CSV")


def _load_f64le(path: Path) -> tuple[np.ndarray, int]:
    """Read a VIB1 binary channel file."""
    raw = path.read_bytes()
    header_size = struct.calcsize(CHANNEL_HEADER_FORMAT)
    if len(raw) < header_size:
        raise ParseError(path, "offset 0", "Truncated header")
    magic, sample_rate, count, _ = struct.unpack_from(CHANNEL_HEADER_FORMAT, raw, offset=0)
    if magic != CHANNEL_MAGIC:
        raise ParseError(path, "offset 0", f"Bad magic {magic!r}")
    expected = header_size + count * 8
    if len(raw) != expected:
        raise ParseError(
            path, f"offset {min(len(raw), expected)}", f"Expected {count} samples"
        )
    return np.frombuffer(raw, dtype="<f8", count=count, offset=header_size).copy(), sample_rate


def load_channel(
    path: str | os.PathLike,
    fmt: ChannelFormat | str = ChannelFormat.CSV,
    sample_rate_hz: float = DEF_SAMPLE_RATE_HZ,
) -> Signal:
    """Read a channel file into a Signal.

    CSV files carry no sample rate, so ``sample_rate_hz`` applies; binary
    files use the rate in their header.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("Channel file not found", context=path)

    if ChannelFormat(fmt) is ChannelFormat.F64LE:
        samples, sample_rate_hz = _load_f64le(path)
    else:
        samples = _load_csv(path)

    if samples.size == 0:
        raise ParseError(path, "line 1", "No samples")
    if not np.all(finite := np.isfinite(samples)):
        raise NonFiniteError(context=path, index=int(np.argmin(finite)))
    return Signal(samples=samples, sample_rate_hz=sample_rate_hz)


def save_channel(
    signal: Signal, path: str | os.PathLike, fmt: ChannelFormat | str = ChannelFormat.CSV
) -> None:
    """Write a channel file readable by :func:`load_channel`."""
    path = Path(path)
    if ChannelFormat(fmt) is ChannelFormat.F64LE:
        header = struct.pack(
            CHANNEL_HEADER_FORMAT,
            CHANNEL_MAGIC,
            int(signal.sample_rate_hz),
            signal.samples.size,
            0,
        )
        path.write_bytes(header + signal.samples.astype("<f8").tobytes())
    else:
        np.savetxt(path, signal.samples, fmt="%.17g")


def read_manifest(
    path: str | os.PathLike,
    fmt: ChannelFormat | str = ChannelFormat.CSV,
    sample_rate_hz: float = DEF_SAMPLE_RATE_HZ,
) -> list[RawRecord]:
    """Load every recording listed in a manifest.

    One ``path,channel_id,condition`` triple per line; relative paths are
    resolved against the manifest's directory; blank and ``#`` lines skipped.
    """
    path = Path(path)
    _LOGGER.debug(log_formatter.format("entered, manifest: %s"), path)
    records: list[RawRecord] = []
    with path.open(encoding="utf-8", newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise ParseError(path, f"line {line_no}", "Expected path,channel_id,condition")
            try:
                entry = MANIFEST_ROW_SCHEMA(
                    dict(zip(("path", "channel_id", "condition"), (c.strip() for c in row)))
                )
            except vol.Invalid as err:
                raise ParseError(path, f"line {line_no}", str(err)) from err

            channel_path = Path(entry["path"])
            if not channel_path.is_absolute():
                channel_path = path.parent / channel_path
            records.append(
                RawRecord(
                    channel_id=entry["channel_id"],
                    condition=entry["condition"],
                    signal=load_channel(channel_path, fmt=fmt, sample_rate_hz=sample_rate_hz),
                    source=str(channel_path),
                )
            )

    if not records:
        raise ParseError(path, "line 1", "Manifest lists no recordings")
    _LOGGER.debug(log_formatter.format("exited, %d records"), len(records))
    return records


# endregion


# region #-- windowing --#
def window(signal: Signal, window_len: int, count: int) -> list[np.ndarray]:
    """The first ``count`` contiguous, non-overlapping windows of a signal."""
    if window_len < 1 or count < 1:
        raise ConfigError("window_len and count must be positive", context=(window_len, count))
    required = window_len * count
    if len(signal) < required:
        raise SignalTooShortError("window", length=len(signal), required=required)
    return [
        signal.samples[idx * window_len : (idx + 1) * window_len].copy() for idx in range(count)
    ]


def _shuffle_order(n: int, seed: int, purpose: str) -> np.ndarray:
    """Seeded Fisher-Yates permutation of ``range(n)``."""
    generator = np.random.Generator(np.random.Philox(key=derive_seed(seed, purpose) & U64_MASK))
    return generator.permutation(n)


def _path_id(source: str) -> str:
    """Source path without anchor or suffix, directories joined by ``-``."""
    path = PurePath(source).with_suffix("")
    parts = path.parts[1:] if path.anchor else path.parts
    return "-".join(parts)


def _file_ids(records: Sequence[RawRecord]) -> list[str]:
    """File stem of each record, or its whole path when two sources share a stem."""
    stems = [Path(record.source).stem if record.source else record.channel_id for record in records]
    sources: dict[str, set[str]] = {}
    for stem, record in zip(stems, records):
        sources.setdefault(stem, set()).add(record.source)
    return [
        _path_id(record.source) if record.source and len(sources[stem]) > 1 else stem
        for stem, record in zip(stems, records)
    ]


def build_dataset(
    records: Sequence[RawRecord], window_len: int, windows_per_record: int, seed: int
) -> WindowedDataset:
    """Window and label every record, then shuffle samples and labels together."""
    _LOGGER.debug(log_formatter.format("entered"))
    if not records:
        raise DataError("No records to build a dataset from")

    samples: list[np.ndarray] = []
    labels: list[int] = []
    provenance: list[Provenance] = []
    sample_rates = {record.signal.sample_rate_hz for record in records}
    if len(sample_rates) > 1:
        raise DataError("Records have different sample rates", context=sorted(sample_rates))

    for record, file_id in zip(records, _file_ids(records)):
        try:
            windows = window(record.signal, window_len, windows_per_record)
        except SignalTooShortError as err:
            raise SignalTooShortError(
                f"{record.source or file_id}:{record.channel_id}",
                length=len(record.signal),
                required=window_len * windows_per_record,
            ) from err
        for idx, win in enumerate(windows):
            samples.append(win)
            labels.append(record.label)
            provenance.append(Provenance(file=file_id, channel=record.channel_id, window_index=idx))

    if len(set(provenance)) != len(provenance):
        duplicate = next(prov for prov, count in Counter(provenance).items() if count > 1)
        raise DataError("Recording listed more than once", context=str(duplicate))

    order = _shuffle_order(len(samples), seed, "shuffle")
    dataset = WindowedDataset(
        samples=tuple(samples[i] for i in order),
        labels=np.asarray(labels, dtype=np.int64)[order],
        window_len=window_len,
        decomposed=False,
        provenance=tuple(provenance[i] for i in order),
        sample_rate_hz=sample_rates.pop(),
    )
    _LOGGER.debug(
        log_formatter.format("exited, %d samples (%d healthy / %d damaged)"),
        len(dataset),
        *dataset.class_counts(),
    )
    return dataset


def split(
    ds: WindowedDataset,
    train_frac: float = DEF_TRAIN_FRAC,
    val_frac: float = DEF_VAL_FRAC,
    seed: int | None = None,
) -> tuple[WindowedDataset, WindowedDataset, WindowedDataset]:
    """Cut the dataset into train / validation / test partitions.

    The cut is contiguous over the current (already shuffled) order; passing
    ``seed`` reshuffles first. Sizes are ``floor(n * train_frac)``,
    ``floor(n * val_frac)`` and the remainder.
    """
    try:
        SPLIT_SCHEMA({"train_frac": train_frac, "val_frac": val_frac})
    except vol.Invalid as err:
        raise ConfigError(str(err), context="split") from err

    n = len(ds)
    order = np.arange(n) if seed is None else _shuffle_order(n, seed, "split")
    n_train = int(np.floor(n * train_frac))
    n_val = int(np.floor(n * val_frac))
    sizes = {"train": n_train, "validation": n_val, "test": n - n_train - n_val}
    for partition, size in sizes.items():
        if size < 1:
            raise EmptyPartitionError(partition, n)

    return (
        ds.subset(order[:n_train]),
        ds.subset(order[n_train : n_train + n_val]),
        ds.subset(order[n_train + n_val :]),
    )


# endregion


# region #-- decomposition --#
def _decompose_window(
    samples: np.ndarray,
    sample_rate_hz: float,
    cfg: CeemdanConfig,
    sift_cfg: SiftConfig,
    provenance: Provenance,
) -> IMFSet:
    """Decompose one window with a seed derived from its provenance."""
    window_cfg = dataclasses.replace(
        cfg,
        seed=derive_seed(cfg.seed, provenance.file, provenance.channel, provenance.window_index),
    )
    _LOGGER.debug(log_formatter.scoped(str(provenance)).format("decomposing %d samples"), samples.size)
    try:
        return ceemdan(Signal(samples, sample_rate_hz), window_cfg, sift_cfg)
    except ImfDiagError as err:
        raise DecompositionError(str(err), context=str(provenance)) from err


def decompose_all(
    ds: WindowedDataset, cfg: CeemdanConfig, sift_cfg: SiftConfig, workers: int = 1
) -> WindowedDataset:
    """Replace every window by its IMFSet, keeping labels and order.

    Each window's seed depends only on ``cfg.seed`` and its provenance, so
    serial and parallel runs give identical results.
    """
    if ds.decomposed:
        raise DatasetStateError(expected_decomposed=False)
    _LOGGER.debug(log_formatter.format("entered, %d windows, %d workers"), len(ds), workers)

    args = (
        list(ds.samples),
        [ds.sample_rate_hz] * len(ds),
        [cfg] * len(ds),
        [sift_cfg] * len(ds),
        list(ds.provenance),
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            decomposed = list(pool.map(_decompose_window, *args))
    else:
        decomposed = list(map(_decompose_window, *args))

    _LOGGER.debug(log_formatter.format("exited"))
    return dataclasses.replace(ds, samples=tuple(decomposed), decomposed=True)


# endregion


# region #-- cache --#
def cache_filename(provenance: Provenance, label: int) -> str:
    """Name of a sample's file in the cache directory."""
    return f"{provenance}_{label}.csv"


def save_cache(ds: WindowedDataset, cache_dir: str | os.PathLike) -> Path:
    """Write one IMFSet CSV per sample plus an index preserving the order."""
    if not ds.decomposed:
        raise DatasetStateError(expected_decomposed=True)
    filenames = [cache_filename(prov, int(label)) for prov, label in zip(ds.provenance, ds.labels)]
    if len(set(filenames)) != len(filenames):
        duplicate = next(name for name, count in Counter(filenames).items() if count > 1)
        raise DataError("Two samples map to one cache file", context=duplicate)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    with (cache_dir / CACHE_INDEX_FILENAME).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("position", "filename", "file", "channel", "window", "label", "sample_rate_hz"))
        for position, (sample, label, prov, filename) in enumerate(
            zip(ds.samples, ds.labels, ds.provenance, filenames)
        ):
            save_imfset(sample, cache_dir / filename)
            writer.writerow(
                (position, filename, prov.file, prov.channel, prov.window_index, int(label), ds.sample_rate_hz)
            )
    _LOGGER.debug(log_formatter.format("wrote %d samples to %s"), len(ds), cache_dir)
    return cache_dir


def load_cache(cache_dir: str | os.PathLike) -> WindowedDataset:
    """Load a decomposed dataset written by :func:`save_cache`."""
    cache_dir = Path(cache_dir)
    if not cache_dir.is_dir():
        raise DataError("Cache directory not found", context=cache_dir)

    index_path = cache_dir / CACHE_INDEX_FILENAME
    if not index_path.is_file():
        raise DataError("Cache index missing, sample order cannot be recovered", context=index_path)
    with index_path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    if not rows:
        raise DataError("Cache directory holds no samples", context=cache_dir)

    samples = [load_imfset(cache_dir / row["filename"]) for row in rows]
    lengths = {sample.source_length for sample in samples}
    if len(lengths) != 1:
        raise ShapeError(cache_dir, expected="one window length", actual=sorted(lengths))

    return WindowedDataset(
        samples=tuple(samples),
        labels=np.asarray([int(row["label"]) for row in rows], dtype=np.int64),
        window_len=lengths.pop(),
        decomposed=True,
        provenance=tuple(
            Provenance(file=row["file"], channel=row["channel"], window_index=int(row["window"]))
            for row in rows
        ),
        sample_rate_hz=float(rows[0].get("sample_rate_hz") or DEF_SAMPLE_RATE_HZ),
    )


# endregion
