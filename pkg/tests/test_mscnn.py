"""Tests for the multiscale network and its training loop."""

from __future__ import annotations

import numpy as np
import pytest

from imfdiag.ceemdan import IMFSet
from imfdiag.const import Mode
from imfdiag.exceptions import ConfigError, DatasetStateError, EmptyPartitionError, NumericError, ShapeError
from imfdiag.mscnn import (
    EarlyStopping,
    EpochRecord,
    ModelParams,
    ModelSpec,
    TrainConfig,
    TrainHistory,
    build,
    fit,
    forward,
    forward_batch,
    loss_and_grads,
    predict,
    prepare_input,
    standardize,
)
from imfdiag.neuralnet import grad_check


# region spec
def test_default_architecture_sizes():
    spec = ModelSpec()
    assert spec.branch_lengths == (19996, 9998, 9994, 4997)
    assert spec.branch_flatten == 16 * 4997
    assert spec.concat_len == 10 * 16 * 4997


def test_minimum_input_length_sizes():
    assert ModelSpec(input_len=24).branch_flatten == 48


def test_toy_architecture_sizes(toy_spec):
    assert toy_spec.branch_lengths == (28, 14, 10, 5)
    assert toy_spec.concat_len == 800
    shapes = toy_spec.param_shapes()
    assert shapes["branch0.conv1.weight"] == (8, 1, 5)
    assert shapes["branch9.conv2.weight"] == (16, 8, 5)
    assert shapes["head.fc1.weight"] == (32, 800)
    assert shapes["head.fc2.bias"] == (2,)
    assert len(shapes) == 10 * 4 + 4
    assert f"parameters: {toy_spec.parameter_count()}" in toy_spec.summary()


def test_spec_rejects_short_input():
    with pytest.raises(ConfigError):
        ModelSpec(input_len=23)
    ModelSpec(input_len=24)
    with pytest.raises(ConfigError):
        ModelSpec(drop_head=1.0)
    with pytest.raises(ConfigError):
        ModelSpec(kernel_width=3)


def test_spec_meta_round_trip(toy_spec):
    assert ModelSpec.from_mapping(toy_spec.to_meta()) == toy_spec


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(lr=0)
    with pytest.raises(ConfigError):
        TrainConfig(max_epochs=10, patience=11)
    cfg = TrainConfig.from_mapping({"lr": "0.01", "batch_size": "16"})
    assert (cfg.lr, cfg.batch_size) == (0.01, 16)


# endregion


# region parameters
def test_build_is_seeded(toy_spec):
    first = build(toy_spec, seed=5)
    again = build(toy_spec, seed=5)
    other = build(toy_spec, seed=6)
    for name in toy_spec.param_shapes():
        assert np.array_equal(first[name], again[name])
    assert not np.array_equal(first["branch0.conv1.weight"], other["branch0.conv1.weight"])
    assert np.all(first["head.fc1.bias"] == 0)


def test_branches_do_not_share_weights(toy_spec):
    params = build(toy_spec, seed=0)
    assert not np.array_equal(params["branch0.conv1.weight"], params["branch1.conv1.weight"])


def test_params_reject_wrong_shapes(toy_spec):
    tensors = build(toy_spec).tensors
    tensors["head.fc2.bias"] = np.zeros(3)
    with pytest.raises(ShapeError):
        ModelParams(spec=toy_spec, tensors=tensors)


def test_params_checkpoint_round_trip(tmp_path, toy_spec):
    params = build(toy_spec, seed=2)
    path = tmp_path / "model.msc"
    params.save(path)
    loaded = ModelParams.load(path)
    assert loaded.spec == toy_spec
    for name in toy_spec.param_shapes():
        assert loaded[name].tobytes() == params[name].tobytes()


# endregion


# region forward
def test_standardize_rows():
    rows = np.stack([np.linspace(0, 10, 50), 3 + np.sin(np.arange(50.0)), np.full(50, 4.0)])
    out = standardize(rows)
    np.testing.assert_allclose(out[:2].mean(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(out[:2].std(axis=1), 1, rtol=1e-9)
    assert np.all(out[2] == 0)


def test_prepare_input_shapes(toy_spec, make_decomposed):
    ds = make_decomposed(n=3)
    assert prepare_input(ds.samples[0], toy_spec).shape == (1, 10, 32)
    assert prepare_input(list(ds.samples), toy_spec).shape == (3, 10, 32)
    with pytest.raises(ShapeError):
        prepare_input(np.zeros((9, 32)), toy_spec)


def test_forward_probabilities(toy_spec, make_decomposed):
    params = build(toy_spec, seed=0)
    sample = make_decomposed(n=1).samples[0]
    probs, cache = forward(params, sample)
    assert probs.shape == (2,)
    assert np.all(probs >= 0)
    assert abs(probs.sum() - 1) <= 1e-12
    assert cache.features.shape == (1, 800)


def test_forward_rejects_mismatched_sample(toy_spec):
    params = build(toy_spec)
    with pytest.raises(ShapeError):
        forward(params, IMFSet(imfs=np.zeros((9, 32)), residual=np.zeros(32)))
    with pytest.raises(ShapeError):
        forward(params, IMFSet(imfs=np.zeros((10, 40)), residual=np.zeros(40)))


def test_infer_mode_is_deterministic(toy_spec, make_decomposed):
    params = build(toy_spec, seed=0)
    x = prepare_input(list(make_decomposed(n=4).samples), toy_spec)
    first, _ = forward_batch(params, x, Mode.INFER, seed=1)
    second, _ = forward_batch(params, x, Mode.INFER, seed=2)
    assert np.array_equal(first, second)
    trained, _ = forward_batch(params, x, Mode.TRAIN, seed=1)
    assert not np.array_equal(first, trained)


def test_branch_sees_only_its_imf(toy_spec, make_decomposed):
    params = build(toy_spec, seed=3)
    x = prepare_input(list(make_decomposed(n=2).samples), toy_spec)
    flat = toy_spec.branch_flatten

    zeroed = x.copy()
    zeroed[:, 4, :] = 0.0
    _, cache = forward_batch(params, zeroed)
    assert np.all(cache.features[:, 4 * flat : 5 * flat] == 0)

    perturbed = x.copy()
    perturbed[:, 4, :] = np.random.default_rng(0).standard_normal((2, 32))
    _, base = forward_batch(params, x)
    _, moved = forward_batch(params, perturbed)
    others = np.ones(toy_spec.concat_len, dtype=bool)
    others[4 * flat : 5 * flat] = False
    assert np.array_equal(base.features[:, others], moved.features[:, others])


def test_full_model_gradients(toy_spec, make_decomposed):
    params = build(toy_spec, seed=4)
    ds = make_decomposed(n=2)
    labels = ds.labels
    tensors = {**params.tensors, "input": prepare_input(list(ds.samples), toy_spec)}

    def closure(t):
        model = ModelParams(spec=toy_spec, tensors={name: t[name] for name in params.tensors})
        loss, grads, grad_input, _ = loss_and_grads(model, t["input"], labels, Mode.INFER)
        return loss, {**grads, "input": grad_input}

    assert grad_check(closure, tensors, h=1e-5, floor=1e-6, max_per_tensor=10) < 1e-4


def test_every_gradient_element_of_a_tiny_model(make_decomposed):
    spec = ModelSpec(k_branches=2, input_len=24, hidden=4)
    params = build(spec, seed=9)
    ds = make_decomposed(n=2, length=24, k=2, seed=1)
    tensors = {**params.tensors, "input": prepare_input(list(ds.samples), spec)}

    def closure(t):
        model = ModelParams(spec=spec, tensors={name: t[name] for name in params.tensors})
        loss, grads, grad_input, _ = loss_and_grads(model, t["input"], ds.labels, Mode.INFER)
        return loss, {**grads, "input": grad_input}

    assert grad_check(closure, tensors, h=1e-5, floor=1e-12, max_per_tensor=None) < 1e-4


def test_train_mode_gradients_reuse_masks(toy_spec, make_decomposed):
    params = build(toy_spec, seed=4)
    ds = make_decomposed(n=2)
    tensors = {"head.fc1.weight": params["head.fc1.weight"], "branch2.conv2.weight": params["branch2.conv2.weight"]}

    def closure(t):
        model = ModelParams(spec=toy_spec, tensors={**params.tensors, **t})
        loss, grads, _, _ = loss_and_grads(
            model, prepare_input(list(ds.samples), toy_spec), ds.labels, Mode.TRAIN, seed=17
        )
        return loss, grads

    assert grad_check(closure, tensors, h=1e-5, floor=1e-6, max_per_tensor=10) < 1e-4


# endregion


# region training
def test_early_stopping_tracker():
    stopper = EarlyStopping(patience=2)
    assert stopper.update(1, 1.0)
    assert not stopper.update(2, 1.0)
    assert not stopper.should_stop
    assert stopper.update(3, 0.5)
    assert not stopper.update(4, 0.6)
    assert not stopper.update(5, 0.7)
    assert stopper.should_stop
    assert stopper.best_epoch == 3


def test_history_views():
    history = TrainHistory(
        epochs=[EpochRecord(1, 0.9, 0.8, 0.5, 2.0), EpochRecord(2, 0.5, 0.4, 0.75, 4.0), EpochRecord(3, 0.4, 0.6, 0.7, 3.0)],
        best_epoch=2,
    )
    assert len(history) == 3
    assert history.val_loss == [0.8, 0.4, 0.6]
    assert history.best_val_acc == 0.75
    assert history.seconds_per_epoch == 3.0
    assert EpochRecord(1, 0.9, 0.8, 0.5, 2.0) == EpochRecord(1, 0.9, 0.8, 0.5, 99.0)


def test_fit_overfits_separable_data(make_decomposed):
    # dropout lowered from the 0.6 / 0.7 defaults so eight samples can be memorised
    spec = ModelSpec(input_len=32, drop_branch=0.2, drop_head=0.2)
    ds = make_decomposed(n=8)
    params, history = fit(ds, ds, spec, TrainConfig(lr=1e-3, batch_size=8, max_epochs=500, patience=500, seed=0))
    labels, probs, seconds = predict(params, ds)
    assert np.array_equal(labels, ds.labels)
    assert probs.shape == (8, 2)
    assert seconds >= 0
    assert len(history) == 500
    assert not history.stopped_early
    assert history.val_loss[history.best_epoch - 1] == min(history.val_loss)


def test_fit_stops_early_and_restores_best(toy_spec, make_decomposed):
    ds = make_decomposed(n=4)
    snapshots = {}

    def validate(params, epoch):
        snapshots[epoch] = params.copy()
        return float(epoch), 0.5

    params, history = fit(
        ds, ds, toy_spec, TrainConfig(max_epochs=100, patience=15, batch_size=4), validate=validate
    )
    assert len(history) == 16
    assert history.best_epoch == 1
    assert history.stopped_early
    for name in toy_spec.param_shapes():
        assert np.array_equal(params[name], snapshots[1][name])


def test_fit_stopped_early_flag(toy_spec, make_decomposed):
    ds = make_decomposed(n=4)
    _, history = fit(
        ds, ds, toy_spec, TrainConfig(max_epochs=3, patience=1), validate=lambda _p, epoch: (float(epoch), 0.5)
    )
    assert len(history) == 2
    assert history.stopped_early

    _, history = fit(
        ds, ds, toy_spec, TrainConfig(max_epochs=3, patience=3), validate=lambda _p, epoch: (1.0 / epoch, 0.5)
    )
    assert len(history) == 3
    assert not history.stopped_early
    assert history.best_epoch == 3


def test_fit_is_reproducible(toy_spec, make_decomposed):
    ds = make_decomposed(n=6)
    cfg = TrainConfig(lr=1e-3, batch_size=4, max_epochs=5, patience=5, seed=21)
    first, first_history = fit(ds, ds, toy_spec, cfg)
    second, second_history = fit(ds, ds, toy_spec, cfg)
    assert first_history == second_history
    for name in toy_spec.param_shapes():
        assert first[name].tobytes() == second[name].tobytes()


def test_fit_reports_each_epoch(toy_spec, make_decomposed):
    ds = make_decomposed(n=4)
    seen = []
    fit(ds, ds, toy_spec, TrainConfig(max_epochs=4, patience=4), on_epoch=seen.append)
    assert [record.epoch for record in seen] == [1, 2, 3, 4]


def test_fit_raises_on_non_finite_validation(toy_spec, make_decomposed):
    ds = make_decomposed(n=4)
    with pytest.raises(NumericError):
        fit(ds, ds, toy_spec, TrainConfig(max_epochs=3, patience=3), validate=lambda _p, _e: (float("nan"), 0.0))


def test_fit_rejects_bad_datasets(toy_spec, make_decomposed):
    ds = make_decomposed(n=4)
    with pytest.raises(EmptyPartitionError):
        fit(ds, ds.subset([]), toy_spec, TrainConfig(max_epochs=1, patience=1))
    with pytest.raises(ShapeError):
        fit(ds, ds, ModelSpec(input_len=40), TrainConfig(max_epochs=1, patience=1))
    raw = make_decomposed(n=4)
    raw = type(raw)(
        samples=tuple(s.imfs[0] for s in raw.samples),
        labels=raw.labels,
        window_len=raw.window_len,
        decomposed=False,
        provenance=raw.provenance,
    )
    with pytest.raises(DatasetStateError):
        fit(raw, ds, toy_spec, TrainConfig(max_epochs=1, patience=1))


def test_predict_ties_go_to_healthy(toy_spec, make_decomposed):
    params = build(toy_spec, seed=0)
    params.tensors["head.fc2.weight"][:] = 0.0
    params.tensors["head.fc2.bias"][:] = 0.0
    labels, probs, _ = predict(params, make_decomposed(n=4))
    assert labels.tolist() == [0, 0, 0, 0]
    np.testing.assert_allclose(probs, 0.5)


def test_predict_empty_dataset(toy_spec, make_decomposed):
    labels, probs, seconds = predict(build(toy_spec), make_decomposed(n=4).subset([]))
    assert labels.size == 0
    assert probs.shape == (0, 2)
    assert seconds == 0.0


def test_predict_matches_forward(toy_spec, make_decomposed):
    params = build(toy_spec, seed=8)
    ds = make_decomposed(n=5)
    labels, probs, _ = predict(params, ds, batch_size=2)
    for idx, sample in enumerate(ds.samples):
        single, _ = forward(params, sample)
        np.testing.assert_allclose(probs[idx], single, rtol=1e-12)
        assert labels[idx] == int(single[1] > single[0])


# endregion
