"""Shared fixtures."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from imfdiag.ceemdan import IMFSet
from imfdiag.const import Condition
from imfdiag.dataset import Provenance, RawRecord, WindowedDataset
from imfdiag.mscnn import ModelSpec
from imfdiag.synthetic import synthetic_recording

SAMPLE_RATE = 40000


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def two_tone() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """50 Hz + 500 Hz at 40 kHz for 0.5 s: (signal, low tone, high tone)."""
    t = np.arange(int(0.5 * SAMPLE_RATE)) / SAMPLE_RATE
    low = np.sin(2 * np.pi * 50 * t + 0.3)
    high = 0.5 * np.sin(2 * np.pi * 500 * t + 0.7)
    return low + high, low, high


@pytest.fixture
def toy_spec() -> ModelSpec:
    return ModelSpec(k_branches=10, input_len=32)


def _imfset(label: int, length: int, k: int, generator: np.random.Generator) -> IMFSet:
    """Rows oscillate slowly for healthy and quickly for damaged windows."""
    t = np.arange(length) / length
    cycles = 2.0 if label == 0 else 6.0
    rows = np.stack(
        [
            np.sin(2 * np.pi * cycles * t + generator.uniform(0, 0.5)) + 0.05 * generator.standard_normal(length)
            for _ in range(k)
        ]
    )
    return IMFSet(imfs=rows, residual=np.zeros(length))


@pytest.fixture
def make_decomposed() -> Callable[..., WindowedDataset]:
    """Factory for small, separable, already decomposed datasets."""

    def factory(n: int = 8, length: int = 32, k: int = 10, seed: int = 0) -> WindowedDataset:
        generator = np.random.default_rng(seed)
        labels = np.arange(n) % 2
        return WindowedDataset(
            samples=tuple(_imfset(int(label), length, k, generator) for label in labels),
            labels=labels,
            window_len=length,
            decomposed=True,
            provenance=tuple(Provenance("toy", "AN3", idx) for idx in range(n)),
        )

    return factory


@pytest.fixture
def small_records() -> list[RawRecord]:
    """Two healthy and two damaged 0.05 s recordings."""
    records = []
    for condition in Condition:
        for idx in range(2):
            records.append(
                RawRecord(
                    channel_id="AN3",
                    condition=condition,
                    signal=synthetic_recording(condition, 0.05, SAMPLE_RATE, seed=100 * idx + len(records)),
                    source=f"{condition.value}{idx}.csv",
                )
            )
    return records
