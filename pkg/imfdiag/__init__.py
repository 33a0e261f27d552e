"""CEEMDAN decomposition and multiscale CNN diagnosis of gearbox vibration."""

# region #-- imports --#
from __future__ import annotations

from .ceemdan import CeemdanConfig, IMFSet, ceemdan, reconstruct
from .dataset import WindowedDataset, build_dataset, decompose_all, read_manifest, split
from .exceptions import ImfDiagError
from .metrics import Metrics, compute_metrics
from .mscnn import ModelParams, ModelSpec, TrainConfig, TrainHistory, build, fit, predict
from .signal_core import Signal, SiftConfig, emd

# endregion

__all__ = [
    "CeemdanConfig",
    "IMFSet",
    "ImfDiagError",
    "Metrics",
    "ModelParams",
    "ModelSpec",
    "Signal",
    "SiftConfig",
    "TrainConfig",
    "TrainHistory",
    "WindowedDataset",
    "build",
    "build_dataset",
    "ceemdan",
    "compute_metrics",
    "decompose_all",
    "emd",
    "fit",
    "predict",
    "read_manifest",
    "reconstruct",
    "split",
]
