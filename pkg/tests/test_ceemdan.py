"""Tests for the noise-assisted decomposition."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from imfdiag.ceemdan import (
    CeemdanConfig,
    IMFSet,
    ceemdan,
    derive_seed,
    gaussian_noise,
    load_imfset,
    reconstruct,
    save_imfset,
)
from imfdiag.exceptions import ConfigError, ParseError, ShapeError, SignalTooShortError
from imfdiag.signal_core import Signal, SiftConfig, zero_crossings

FAST = CeemdanConfig(nr=2, max_iter=40, k=4, seed=7)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 2, 3) != derive_seed(2, 2, 3)
    assert 0 <= derive_seed(2**64 - 1, "x") < 2**64


def test_gaussian_noise_reproducible():
    first = gaussian_noise(10000, 2.0, 99)
    assert np.array_equal(first, gaussian_noise(10000, 2.0, 99))
    assert not np.array_equal(first, gaussian_noise(10000, 2.0, 100))
    assert np.std(first) == pytest.approx(2.0, rel=0.05)


def test_gaussian_noise_statistics():
    noise = gaussian_noise(10**6, 1.0, 2024)
    assert abs(noise.mean()) <= 0.005
    assert 0.995 <= noise.std() <= 1.005
    assert abs(np.corrcoef(noise, gaussian_noise(10**6, 1.0, 2025))[0, 1]) < 0.01


def test_config_validation():
    with pytest.raises(ConfigError):
        CeemdanConfig(nr=0)
    with pytest.raises(ConfigError):
        CeemdanConfig(snr_flag=2)
    with pytest.raises(ConfigError):
        CeemdanConfig(epsilon=0.0)
    cfg = CeemdanConfig.from_mapping({"nr": "25", "max_iter": "100", "snr_flag": "0"})
    assert (cfg.nr, cfg.max_iter, cfg.snr_flag) == (25, 100, 0)


def test_sifts_per_imf_share():
    assert CeemdanConfig(max_iter=250, k=10).sifts_per_imf == 25
    assert CeemdanConfig(max_iter=5, k=10).sifts_per_imf == 1


def test_too_short_signal_raises():
    with pytest.raises(SignalTooShortError):
        ceemdan(Signal(np.sin(np.arange(99.0))), FAST, SiftConfig())


def test_shape_and_config():
    x = np.random.default_rng(0).standard_normal(500)
    imfset = ceemdan(Signal(x), FAST, SiftConfig())
    assert imfset.imfs.shape == (4, 500)
    assert imfset.residual.shape == (500,)
    assert imfset.config == FAST
    assert imfset.sift_iterations > 0


def test_reconstruction_on_random_and_structured_signals():
    generator = np.random.default_rng(42)
    t = np.arange(4000) / 40000
    signals = []
    for idx in range(100):
        if idx % 2:
            signals.append(generator.standard_normal(4000))
        else:
            freq = generator.uniform(20, 2000)
            signals.append(
                np.sin(2 * np.pi * freq * t) + 0.3 * np.sin(2 * np.pi * 7 * freq * t) + 0.1 * idx * t
            )
    for x in signals:
        imfset = ceemdan(Signal(x), FAST, SiftConfig())
        assert np.max(np.abs(x - reconstruct(imfset))) <= 1e-6 * np.max(np.abs(x))


def test_bit_identical_for_same_seed():
    x = np.random.default_rng(3).standard_normal(800)
    first = ceemdan(Signal(x), FAST, SiftConfig())
    second = ceemdan(Signal(x), FAST, SiftConfig())
    assert np.array_equal(first.imfs, second.imfs)
    assert np.array_equal(first.residual, second.residual)

    other = ceemdan(Signal(x), CeemdanConfig(nr=2, max_iter=40, k=4, seed=8), SiftConfig())
    assert not np.array_equal(first.imfs, other.imfs)


def test_snr_flag_changes_noise_scale():
    t = np.arange(2000) / 40000
    x = 3.0 * np.sin(2 * np.pi * (200 + 4000 * t) * t) * (1 + t * 20)
    adaptive = ceemdan(Signal(x), CeemdanConfig(nr=4, max_iter=40, k=4, seed=7), SiftConfig())
    fixed = ceemdan(
        Signal(x), CeemdanConfig(nr=4, max_iter=40, k=4, seed=7, snr_flag=0), SiftConfig()
    )
    assert np.max(np.abs(adaptive.imfs[0] - fixed.imfs[0])) > 1e-8
    assert not np.array_equal(adaptive.imfs[1:], fixed.imfs[1:])


def test_noise_averages_out():
    zero = ceemdan(Signal(np.zeros(400)), CeemdanConfig(nr=500, max_iter=20, k=2, seed=5), SiftConfig())
    assert np.array_equal(zero.imfs, np.zeros((2, 400)))

    # a ripple far below the injected noise leaves only averaged noise behind
    ripple = 1e-4 * np.sin(2 * np.pi * np.arange(400) / 40)
    cfg = CeemdanConfig(nr=500, max_iter=20, k=2, epsilon=0.2, snr_flag=0, seed=5)
    imfset = ceemdan(Signal(ripple), cfg, SiftConfig())
    assert np.max(np.abs(imfset.imfs)) <= 0.2 * cfg.epsilon

    few = ceemdan(Signal(ripple), dataclasses.replace(cfg, nr=2), SiftConfig())
    assert np.max(np.abs(few.imfs[0])) > np.max(np.abs(imfset.imfs[0]))


def test_exhausted_residual_zero_fills():
    x = np.linspace(-1.0, 1.0, 300)
    imfset = ceemdan(Signal(x), FAST, SiftConfig())
    assert np.array_equal(imfset.imfs, np.zeros((4, 300)))
    assert np.array_equal(imfset.residual, x)


def test_two_tone_separation(two_tone):
    x, _, high = two_tone
    imfset = ceemdan(
        Signal(x, 40000), CeemdanConfig(nr=5, max_iter=150, k=3, epsilon=1e-4, seed=1), SiftConfig()
    )
    assert np.corrcoef(imfset.imfs[0], high)[0, 1] > 0.9
    assert zero_crossings(imfset.imfs[0]) > zero_crossings(imfset.imfs[1])


@pytest.mark.slow
def test_two_tone_separation_with_default_settings(two_tone):
    x, low, high = two_tone
    x, low, high = x[:4000], low[:4000], high[:4000]
    imfset = ceemdan(Signal(x, 40000), CeemdanConfig(seed=1), SiftConfig())
    assert imfset.imfs.shape == (10, 4000)
    assert np.max(np.abs(x - reconstruct(imfset))) <= 1e-6 * np.max(np.abs(x))
    assert zero_crossings(imfset.imfs[0]) > zero_crossings(imfset.imfs[1])

    def closest(tone: np.ndarray) -> int:
        return int(np.argmax([abs(np.corrcoef(imf, tone)[0, 1]) if imf.any() else 0.0 for imf in imfset.imfs]))

    assert closest(high) < closest(low)


def test_save_load_round_trip(tmp_path):
    x = np.random.default_rng(5).standard_normal(300)
    imfset = ceemdan(Signal(x), FAST, SiftConfig())
    path = tmp_path / "imfs.csv"
    save_imfset(imfset, path)

    header = path.read_text().splitlines()[0]
    assert header.startswith("# k=4 len=300 seed=7 nr=2 max_iter=40 snr_flag=1")

    loaded = load_imfset(path)
    assert np.array_equal(loaded.imfs, imfset.imfs)
    assert np.array_equal(loaded.residual, imfset.residual)
    assert loaded.config == FAST


def test_load_rejects_bad_files(tmp_path):
    headerless = tmp_path / "a.csv"
    headerless.write_text("1,2\n3,4\n")
    with pytest.raises(ParseError):
        load_imfset(headerless)

    wrong_shape = tmp_path / "b.csv"
    wrong_shape.write_text("# k=2 len=3 seed=0 nr=1 max_iter=1 snr_flag=1 epsilon=0.2\n1,2,3\n4,5,6\n")
    with pytest.raises(ShapeError):
        load_imfset(wrong_shape)


def test_imfset_validates_shapes():
    with pytest.raises(ShapeError):
        IMFSet(imfs=np.zeros((2, 5)), residual=np.zeros(4))
