"""Binary classification metrics with damaged as the positive class."""

# region #-- imports --#
from __future__ import annotations

import dataclasses
from collections.abc import Sequence

import numpy as np

from .exceptions import DataError, ShapeError

# endregion


@dataclasses.dataclass(frozen=True)
class Metrics:
    """Confusion counts, derived scores and timings."""

    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    train_seconds_per_epoch: float = 0.0
    test_ms_per_sample: float = 0.0

    @property
    def n(self) -> int:
        """Number of scored samples."""
        return self.tp + self.fp + self.tn + self.fn


def _ratio(numerator: float, denominator: float) -> float:
    """Division that defines x/0 as 0."""
    return numerator / denominator if denominator > 0 else 0.0


def compute_metrics(
    predicted: Sequence[int] | np.ndarray,
    actual: Sequence[int] | np.ndarray,
    train_seconds_per_epoch: float = 0.0,
    test_seconds_per_sample: float = 0.0,
) -> Metrics:
    """Score predictions against ground truth."""
    predicted = np.asarray(predicted, dtype=np.int64).ravel()
    actual = np.asarray(actual, dtype=np.int64).ravel()
    if predicted.size != actual.size:
        raise ShapeError("compute_metrics", expected=actual.size, actual=predicted.size)
    if predicted.size == 0:
        raise DataError("No predictions to score")
    for name, labels in (("predicted", predicted), ("actual", actual)):
        if np.any((labels != 0) & (labels != 1)):
            raise DataError("Labels must be 0 or 1", context=name)

    tp = int(np.count_nonzero((predicted == 1) & (actual == 1)))
    fp = int(np.count_nonzero((predicted == 1) & (actual == 0)))
    tn = int(np.count_nonzero((predicted == 0) & (actual == 0)))
    fn = int(np.count_nonzero((predicted == 0) & (actual == 1)))

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return Metrics(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / predicted.size,
        precision=precision,
        recall=recall,
        f1=_ratio(2 * precision * recall, precision + recall),
        train_seconds_per_epoch=float(train_seconds_per_epoch),
        test_ms_per_sample=float(test_seconds_per_sample) * 1000.0,
    )
