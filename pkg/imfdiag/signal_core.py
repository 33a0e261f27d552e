"""Empirical mode decomposition primitives.

Extrema detection, spline envelopes, sifting and plain EMD of a single signal.
All functions are pure and operate in double precision.
"""

# region #-- imports --#
from __future__ import annotations

import dataclasses
import logging
from collections.abc import Mapping
from typing import Any

import numpy as np
import voluptuous as vol
from scipy.interpolate import CubicSpline

from .const import (
    DEF_MAX_SIFTS_PER_IMF,
    DEF_MAX_TOTAL_IMFS,
    DEF_MIN_EXTREMA,
    DEF_SAMPLE_RATE_HZ,
    DEF_SD_THRESHOLD,
    Side,
)
from .exceptions import ConfigError, DataError, NonFiniteError, NotEnoughExtremaError
from .logger import Logger

# endregion

_LOGGER = logging.getLogger(__name__)
log_formatter: Logger = Logger()

SIFT_SCHEMA = vol.Schema(
    {
        vol.Required("sd_threshold"): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Required("max_sifts_per_imf"): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("min_extrema"): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Required("max_total_imfs"): vol.All(vol.Coerce(int), vol.Range(min=1)),
    }
)


@dataclasses.dataclass(frozen=True, eq=False)
class Signal:
    """One channel of uniformly sampled vibration data."""

    samples: np.ndarray
    sample_rate_hz: float = DEF_SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        """Validate and freeze the samples."""
        samples = np.array(self.samples, dtype=np.float64).ravel()
        if samples.size == 0:
            raise DataError("Signal has no samples")
        if not np.all(finite := np.isfinite(samples)):
            raise NonFiniteError(context="signal", index=int(np.argmin(finite)))
        if not self.sample_rate_hz > 0:
            raise DataError("Sample rate must be positive", context=self.sample_rate_hz)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        """Number of samples."""
        return self.samples.size

    @property
    def duration_s(self) -> float:
        """Length of the signal in seconds."""
        return self.samples.size / self.sample_rate_hz


@dataclasses.dataclass(frozen=True)
class SiftConfig:
    """Stopping rules for sifting and plain EMD."""

    sd_threshold: float = DEF_SD_THRESHOLD
    max_sifts_per_imf: int = DEF_MAX_SIFTS_PER_IMF
    min_extrema: int = DEF_MIN_EXTREMA
    max_total_imfs: int = DEF_MAX_TOTAL_IMFS

    def __post_init__(self) -> None:
        """Validate the configuration."""
        try:
            SIFT_SCHEMA(dataclasses.asdict(self))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=self.__class__.__name__) from err

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> SiftConfig:
        """Build from loosely typed input, e.g. CLI options."""
        defaults = dataclasses.asdict(cls())
        try:
            return cls(**SIFT_SCHEMA({**defaults, **data}))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=cls.__name__) from err


def _as_array(signal: Signal | np.ndarray) -> np.ndarray:
    """Return the samples of a Signal or an array as a float64 vector."""
    if isinstance(signal, Signal):
        return signal.samples
    return np.asarray(signal, dtype=np.float64)


def find_extrema(signal: Signal | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Locate strictly interior local maxima and minima.

    Runs of equal samples (plateaus) are collapsed first, so a plateau that is
    a peak or trough is reported once at the middle of the run.
    """
    x = _as_array(signal)
    if x.size < 3:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()

    # collapse plateaus into runs
    run_start = np.flatnonzero(np.concatenate(([True], np.diff(x) != 0)))
    run_end = np.append(run_start[1:], x.size) - 1
    values = x[run_start]
    if values.size < 3:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()

    left, mid, right = values[:-2], values[1:-1], values[2:]
    centre = (run_start[1:-1] + run_end[1:-1]) // 2
    maxima = centre[(mid > left) & (mid > right)]
    minima = centre[(mid < left) & (mid < right)]
    return maxima.astype(np.int64), minima.astype(np.int64)


def envelope(
    signal: Signal | np.ndarray, extrema_indices: np.ndarray, side: Side
) -> np.ndarray:
    """Interpolate an envelope through the given extrema.

    Three or more extrema: natural cubic spline with the two nearest extrema
    mirrored across each end of the signal. Fewer: a straight line through
    them, extended to both ends (a single extremum gives a constant).
    """
    x = _as_array(signal)
    idx = np.asarray(extrema_indices, dtype=np.int64)
    if idx.size == 0:
        raise NotEnoughExtremaError(found=0, required=1)
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        raise DataError("Extrema indices must be strictly increasing", context=side)

    n = x.size
    t = np.arange(n, dtype=np.float64)
    values = x[idx]

    if idx.size == 1:
        return np.full(n, values[0], dtype=np.float64)

    if idx.size < 3:
        slope = (values[1] - values[0]) / (idx[1] - idx[0])
        return values[0] + slope * (t - idx[0])

    # mirror the two nearest extrema across each end point
    left_idx = idx[:2][::-1]
    right_idx = idx[-2:][::-1]
    knots_t = np.concatenate((-left_idx, idx, 2 * (n - 1) - right_idx)).astype(np.float64)
    knots_v = np.concatenate((x[left_idx], values, x[right_idx]))

    spline = CubicSpline(knots_t, knots_v, bc_type="natural")
    env = spline(t)
    # knots land exactly on their values
    env[idx] = values
    return env


def _count_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Extrema plus their total count."""
    maxima, minima = find_extrema(x)
    return maxima, minima, maxima.size + minima.size


def sift(signal: Signal | np.ndarray, cfg: SiftConfig) -> tuple[np.ndarray, int]:
    """Extract one IMF candidate by repeatedly removing the envelope mean.

    Stops when the Cauchy-type SD between consecutive candidates drops below
    ``cfg.sd_threshold`` or after ``cfg.max_sifts_per_imf`` passes.
    """
    h = np.array(_as_array(signal), dtype=np.float64)
    maxima, minima, count = _count_extrema(h)
    if count < cfg.min_extrema or not maxima.size or not minima.size:
        raise NotEnoughExtremaError(found=count, required=cfg.min_extrema)

    sift_count = 0
    while sift_count < cfg.max_sifts_per_imf:
        if sift_count:
            maxima, minima, count = _count_extrema(h)
            if count < cfg.min_extrema or not maxima.size or not minima.size:
                break

        mean = 0.5 * (envelope(h, maxima, Side.UPPER) + envelope(h, minima, Side.LOWER))
        h_next = h - mean
        sift_count += 1

        energy = float(np.dot(h, h))
        sd = float(np.dot(mean, mean)) / energy if energy > 0 else 0.0
        h = h_next
        if sd < cfg.sd_threshold:
            break

    return h, sift_count


def emd(signal: Signal | np.ndarray, cfg: SiftConfig) -> tuple[list[np.ndarray], np.ndarray]:
    """Decompose a signal into IMFs and a residual.

    ``sum(imfs) + residual`` reproduces the input up to rounding.
    """
    residual = np.array(_as_array(signal), dtype=np.float64)
    imfs: list[np.ndarray] = []

    while len(imfs) < cfg.max_total_imfs:
        maxima, minima, count = _count_extrema(residual)
        if count < cfg.min_extrema or not maxima.size or not minima.size:
            break
        imf, sift_count = sift(residual, cfg)
        _LOGGER.debug(
            log_formatter.format("IMF %d extracted after %d sifts"),
            len(imfs) + 1,
            sift_count,
        )
        imfs.append(imf)
        residual = residual - imf

    return imfs, residual


def zero_crossings(x: np.ndarray) -> int:
    """Count sign changes; zeros take the sign of the previous non-zero sample."""
    signs = np.sign(np.asarray(x, dtype=np.float64))
    nonzero = np.flatnonzero(signs)
    if nonzero.size < 2:
        return 0
    signs = signs[nonzero]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
