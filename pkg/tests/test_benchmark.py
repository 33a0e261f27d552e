"""End-to-end runs on the surrogate gearbox benchmark; deselected by default."""

from __future__ import annotations

import pytest

from imfdiag.ceemdan import CeemdanConfig
from imfdiag.dataset import build_dataset, decompose_all, read_manifest, split
from imfdiag.metrics import compute_metrics
from imfdiag.mscnn import ModelSpec, TrainConfig, fit, predict
from imfdiag.signal_core import SiftConfig
from imfdiag.sweeps import PipelineSettings, duration_sweep
from imfdiag.synthetic import write_benchmark

pytestmark = pytest.mark.slow

CEEMDAN = CeemdanConfig(nr=20, seed=3)
TRAIN = TrainConfig(lr=1e-3, batch_size=16, max_epochs=100, patience=10, seed=3)


@pytest.fixture(scope="module")
def records(tmp_path_factory):
    manifest = write_benchmark(tmp_path_factory.mktemp("bench"), records_per_class=10, duration_s=1.0, seed=3)
    return read_manifest(manifest)


def test_full_pipeline_detects_damage(records):
    ds = build_dataset(records, window_len=4000, windows_per_record=10, seed=3)
    assert len(ds) == 200
    ds = decompose_all(ds, CEEMDAN, SiftConfig())
    train, val, test = split(ds)

    params, history = fit(train, val, ModelSpec(input_len=4000), TRAIN)
    labels, _, seconds_per_sample = predict(params, test)
    metrics = compute_metrics(labels, test.labels, history.seconds_per_epoch, seconds_per_sample)
    assert metrics.f1 >= 0.95


def test_longer_windows_score_at_least_as_well(records, tmp_path):
    settings = PipelineSettings(
        spec=ModelSpec(input_len=4000),
        train_cfg=TRAIN,
        ceemdan_cfg=CEEMDAN,
        windows_per_record=4,
    )
    rows = duration_sweep(records, (0.10, 0.25), settings, results_path=tmp_path / "sweep.csv")
    assert [row.status for row in rows] == ["ok", "ok"]
    assert rows[1].f1 >= rows[0].f1
