"""Surrogate gearbox recordings for end-to-end runs without the field data.

Healthy recordings are a shaft tone, a gear-mesh tone and its second
harmonic plus Gaussian noise. Damaged recordings add a periodic train of
exponentially decaying resonance bursts, the signature of a localised
tooth or bearing defect.
"""

# region #-- imports --#
from __future__ import annotations

import csv
import logging
import os
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .ceemdan import derive_seed
from .const import DEF_SAMPLE_RATE_HZ, DEF_SEED, NREL_CHANNELS, U64_MASK, ChannelFormat, Condition
from .dataset import save_channel
from .exceptions import ConfigError
from .logger import Logger
from .signal_core import Signal

# endregion

_LOGGER = logging.getLogger(__name__)
log_formatter: Logger = Logger()

SHAFT_HZ: float = 30.0
MESH_TEETH: int = 22
NOISE_STD: float = 0.3
BURST_CARRIER_HZ: float = 3000.0
BURST_RATE_HZ: float = 105.0
BURST_DECAY_S: float = 5e-4
BURST_AMPLITUDE: float = 1.5


def _bursts(
    n: int, sample_rate_hz: float, generator: np.random.Generator, amplitude: float
) -> np.ndarray:
    """Decaying resonance bursts at the fault repetition rate, random start phase."""
    out = np.zeros(n, dtype=np.float64)
    burst_len = int(8 * BURST_DECAY_S * sample_rate_hz)
    t = np.arange(burst_len) / sample_rate_hz
    shape = np.exp(-t / BURST_DECAY_S) * np.sin(2 * np.pi * BURST_CARRIER_HZ * t)
    period = sample_rate_hz / BURST_RATE_HZ
    start = generator.uniform(0, period)
    while start < n:
        idx = int(start)
        stop = min(n, idx + burst_len)
        out[idx:stop] += amplitude * generator.uniform(0.8, 1.2) * shape[: stop - idx]
        start += period * generator.uniform(0.98, 1.02)
    return out


def synthetic_recording(
    condition: Condition | str,
    duration_s: float,
    sample_rate_hz: float = DEF_SAMPLE_RATE_HZ,
    seed: int = DEF_SEED,
    noise_std: float = NOISE_STD,
    burst_amplitude: float = BURST_AMPLITUDE,
) -> Signal:
    """One channel of a healthy or damaged surrogate gearbox."""
    n = int(round(duration_s * sample_rate_hz))
    if n < 1:
        raise ConfigError("Duration too short", context=duration_s)
    generator = np.random.Generator(np.random.Philox(key=seed & U64_MASK))
    t = np.arange(n) / sample_rate_hz

    mesh_hz = SHAFT_HZ * MESH_TEETH
    phases = generator.uniform(0, 2 * np.pi, size=3)
    samples = (
        0.5 * np.sin(2 * np.pi * SHAFT_HZ * t + phases[0])
        + 1.0 * np.sin(2 * np.pi * mesh_hz * t + phases[1])
        + 0.3 * np.sin(2 * np.pi * 2 * mesh_hz * t + phases[2])
        + generator.standard_normal(n) * noise_std
    )
    if Condition(condition) is Condition.DAMAGED:
        samples += _bursts(n, sample_rate_hz, generator, burst_amplitude)
    return Signal(samples=samples, sample_rate_hz=sample_rate_hz)


def write_benchmark(
    out_dir: str | os.PathLike,
    records_per_class: int = 10,
    channels: Sequence[str] = NREL_CHANNELS[:1],
    duration_s: float = 5.0,
    sample_rate_hz: float = DEF_SAMPLE_RATE_HZ,
    seed: int = DEF_SEED,
    fmt: ChannelFormat | str = ChannelFormat.CSV,
) -> Path:
    """Write surrogate channel files plus a manifest; return the manifest path."""
    if records_per_class < 1 or not channels:
        raise ConfigError("Need at least one record and one channel")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = ChannelFormat(fmt)
    suffix = "csv" if fmt is ChannelFormat.CSV else "bin"
    manifest = out_dir / "manifest.csv"
    _LOGGER.debug(log_formatter.format("entered, %s"), out_dir)

    with manifest.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        for condition in Condition:
            for record in range(records_per_class):
                for channel in channels:
                    name = f"{condition.value}{record:02d}_{channel}.{suffix}"
                    signal = synthetic_recording(
                        condition,
                        duration_s,
                        sample_rate_hz,
                        seed=derive_seed(seed, condition.value, record, channel),
                    )
                    save_channel(signal, out_dir / name, fmt)
                    writer.writerow((name, channel, condition.value))

    _LOGGER.debug(log_formatter.format("exited, manifest: %s"), manifest)
    return manifest
