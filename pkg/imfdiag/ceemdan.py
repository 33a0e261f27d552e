"""Noise-assisted decomposition into a fixed number of IMFs.

The procedure follows the decomposition steps as published for the gearbox
diagnosis pipeline rather than canonical CEEMDAN: every stage sifts
``residual + epsilon * (sum of previous IMFs) + white noise`` and averages the
first IMF over the realizations.
"""

# region #-- imports --#
from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
import re
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol

from .const import (
    CEEMDAN_MIN_LENGTH,
    DEF_EPSILON,
    DEF_K,
    DEF_MAX_ITER,
    DEF_NR,
    DEF_SEED,
    DEF_SNR_FLAG,
    U64_MASK,
)
from .exceptions import (
    ConfigError,
    NotEnoughExtremaError,
    ParseError,
    ShapeError,
    SignalTooShortError,
)
from .logger import Logger
from .signal_core import Signal, SiftConfig, find_extrema, sift

# endregion

_LOGGER = logging.getLogger(__name__)

CEEMDAN_SCHEMA = vol.Schema(
    {
        vol.Required("nr"): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("max_iter"): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("snr_flag"): vol.All(vol.Coerce(int), vol.In((0, 1))),
        vol.Required("epsilon"): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Required("k"): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required("seed"): vol.All(vol.Coerce(int), vol.Range(min=0, max=U64_MASK)),
    }
)

_HEADER_FIELD = re.compile(r"(\w+)=(\S+)")


def derive_seed(seed: int, *parts: Any) -> int:
    """Derive an independent 64-bit stream seed from a base seed and a key path.

    BLAKE2b-64 over the textual key path, so the result depends only on the
    parts, never on call order.
    """
    key = ":".join(str(part) for part in (seed, *parts)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def gaussian_noise(length: int, std: float, stream_seed: int) -> np.ndarray:
    """Draw i.i.d. N(0, std²) samples from a Philox counter-based stream."""
    generator = np.random.Generator(np.random.Philox(key=stream_seed & U64_MASK))
    return generator.standard_normal(length) * std


@dataclasses.dataclass(frozen=True)
class CeemdanConfig:
    """Ensemble settings for a decomposition."""

    nr: int = DEF_NR
    max_iter: int = DEF_MAX_ITER
    snr_flag: int = DEF_SNR_FLAG
    epsilon: float = DEF_EPSILON
    k: int = DEF_K
    seed: int = DEF_SEED

    def __post_init__(self) -> None:
        """Validate the configuration."""
        try:
            CEEMDAN_SCHEMA(dataclasses.asdict(self))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=self.__class__.__name__) from err

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> CeemdanConfig:
        """Build from loosely typed input, e.g. a grid CSV row."""
        defaults = dataclasses.asdict(cls())
        try:
            return cls(**CEEMDAN_SCHEMA({**defaults, **data}))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=cls.__name__) from err

    @property
    def sifts_per_imf(self) -> int:
        """Share of the MaxIter sift budget available to each IMF."""
        return max(1, self.max_iter // self.k)

    def header(self, length: int) -> str:
        """Header line used when serialising an IMFSet."""
        return (
            f"k={self.k} len={length} seed={self.seed} nr={self.nr} "
            f"max_iter={self.max_iter} snr_flag={self.snr_flag} epsilon={self.epsilon!r}"
        )


@dataclasses.dataclass(frozen=True, eq=False)
class IMFSet:
    """K intrinsic mode functions plus the residual of one window."""

    imfs: np.ndarray
    residual: np.ndarray
    config: CeemdanConfig | None = None
    sift_iterations: int = 0

    def __post_init__(self) -> None:
        """Validate shapes."""
        imfs = np.atleast_2d(np.asarray(self.imfs, dtype=np.float64))
        residual = np.asarray(self.residual, dtype=np.float64).ravel()
        if imfs.shape[1] != residual.size:
            raise ShapeError("IMFSet", expected=(imfs.shape[0], residual.size), actual=imfs.shape)
        if self.config is not None and imfs.shape[0] != self.config.k:
            raise ShapeError("IMFSet", expected=self.config.k, actual=imfs.shape[0])
        imfs.flags.writeable = False
        residual.flags.writeable = False
        object.__setattr__(self, "imfs", imfs)
        object.__setattr__(self, "residual", residual)

    @property
    def k(self) -> int:
        """Number of IMF rows."""
        return self.imfs.shape[0]

    @property
    def source_length(self) -> int:
        """Length of the decomposed window."""
        return self.residual.size


def reconstruct(imfset: IMFSet) -> np.ndarray:
    """Sum the IMFs and the residual."""
    return imfset.imfs.sum(axis=0) + imfset.residual


def _has_enough_extrema(x: np.ndarray, sift_cfg: SiftConfig) -> bool:
    """Whether a residual can still be sifted."""
    maxima, minima = find_extrema(x)
    return (
        maxima.size + minima.size >= sift_cfg.min_extrema
        and maxima.size > 0
        and minima.size > 0
    )


def _realization(
    base: np.ndarray, noise_std: float, stream_seed: int, sift_cfg: SiftConfig
) -> tuple[np.ndarray, int]:
    """First IMF of one noise-perturbed copy of ``base``."""
    mixture = base
    if noise_std > 0:
        mixture = base + gaussian_noise(base.size, noise_std, stream_seed)
    try:
        return sift(mixture, sift_cfg)
    except NotEnoughExtremaError:
        return np.zeros_like(base), 0


def ceemdan(signal: Signal, cfg: CeemdanConfig, sift_cfg: SiftConfig) -> IMFSet:
    """Decompose a window into exactly ``cfg.k`` ensemble-averaged IMFs.

    Realization ``r`` of stage ``k`` draws its noise from stream
    ``derive_seed(cfg.seed, k, r)``; realizations are averaged in ascending
    order, so the result is bit-identical for a given seed. Rows after an
    early stop (residual without enough extrema) are zero.

    The noise std is ``epsilon * std(residual)`` per stage when
    ``snr_flag`` is 1, and a fixed ``epsilon`` in signal units when it is 0.
    """
    log_formatter = Logger(unique_id=f"seed={cfg.seed}")
    _LOGGER.debug(log_formatter.format("entered"))

    x = signal.samples
    if x.size < CEEMDAN_MIN_LENGTH:
        raise SignalTooShortError("ceemdan", length=x.size, required=CEEMDAN_MIN_LENGTH)

    stage_cfg = dataclasses.replace(
        sift_cfg, max_sifts_per_imf=min(sift_cfg.max_sifts_per_imf, cfg.sifts_per_imf)
    )

    imfs = np.zeros((cfg.k, x.size), dtype=np.float64)
    imf_sum = np.zeros(x.size, dtype=np.float64)
    residual = x.copy()
    sift_total = 0

    for stage in range(1, cfg.k + 1):
        if not _has_enough_extrema(residual, sift_cfg):
            _LOGGER.debug(
                log_formatter.format("residual exhausted at stage %d, zero-filling"), stage
            )
            break

        noise_std = cfg.epsilon * float(np.std(residual)) if cfg.snr_flag else cfg.epsilon
        base = residual + cfg.epsilon * imf_sum if stage > 1 else residual

        accumulated = np.zeros(x.size, dtype=np.float64)
        for realization in range(1, cfg.nr + 1):
            mode, count = _realization(
                base, noise_std, derive_seed(cfg.seed, stage, realization), stage_cfg
            )
            accumulated += mode
            sift_total += count

        imf = accumulated / cfg.nr
        imfs[stage - 1] = imf
        imf_sum += imf
        residual = residual - imf

    _LOGGER.debug(log_formatter.format("exited, %d sift iterations"), sift_total)
    return IMFSet(imfs=imfs, residual=residual, config=cfg, sift_iterations=sift_total)


# region #-- serialisation --#
def save_imfset(imfset: IMFSet, path: str | os.PathLike) -> None:
    """Write an IMFSet as CSV: one row per IMF, then the residual."""
    cfg = imfset.config or CeemdanConfig(k=imfset.k)
    rows = np.vstack((imfset.imfs, imfset.residual))
    np.savetxt(
        path,
        rows,
        fmt="%.17g",
        delimiter=",",
        header=cfg.header(imfset.source_length),
        comments="# ",
    )


def load_imfset(path: str | os.PathLike) -> IMFSet:
    """Read an IMFSet written by :func:`save_imfset`."""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        header = handle.readline()
    if not header.startswith("#"):
        raise ParseError(path, "line 1", "Missing IMFSet header")
    fields = dict(_HEADER_FIELD.findall(header))

    try:
        length = int(fields.pop("len"))
        cfg = CeemdanConfig.from_mapping(fields)
    except (KeyError, ValueError, ConfigError) as err:
        raise ParseError(path, "line 1", f"Bad IMFSet header: {err}") from err

    try:
        rows = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as err:
        raise ParseError(path, "body", str(err)) from err
    if rows.shape != (cfg.k + 1, length):
        raise ShapeError(path, expected=(cfg.k + 1, length), actual=rows.shape)

    return IMFSet(imfs=rows[:-1], residual=rows[-1], config=cfg)


# endregion
