"""Tests for the layers, the optimiser, the gradient checker and checkpoints."""

from __future__ import annotations

import math

import numpy as np
import pytest

from imfdiag.const import Activation, ExitCode, Mode
from imfdiag.exceptions import ConfigError, NonFiniteError, ParseError, ShapeError, SignalTooShortError
from imfdiag.neuralnet import (
    AdamState,
    adam_update,
    conv1d,
    conv1d_backward,
    dense,
    dense_backward,
    dropout,
    dropout_backward,
    grad_check,
    load_checkpoint,
    maxpool1d,
    maxpool1d_backward,
    save_checkpoint,
    softmax_xent,
    tensor_view,
)


def test_tensor_view():
    view = tensor_view(np.arange(6.0), 2, 3)
    assert view.shape == (2, 3)
    with pytest.raises(ShapeError):
        tensor_view(np.arange(5.0), 2, 3)
    with pytest.raises(NonFiniteError):
        tensor_view(np.array([1.0, np.inf]), 1, 2)


# region conv1d
def test_conv1d_shifted_identity():
    x = np.arange(1.0, 11.0).reshape(1, 1, 10)
    weights = np.array([1.0, 0, 0, 0, 0]).reshape(1, 1, 5)
    out, _ = conv1d(x, weights, np.zeros(1), Activation.NONE)
    assert out.ravel().tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]


def test_conv1d_moving_average_of_constant():
    x = np.full((1, 1, 12), 3.5)
    out, _ = conv1d(x, np.full((1, 1, 5), 0.2), np.zeros(1), Activation.NONE)
    np.testing.assert_allclose(out, 3.5, rtol=1e-15)
    assert out.shape == (1, 1, 8)


def test_conv1d_relu_and_errors():
    x = -np.ones((1, 1, 6))
    out, _ = conv1d(x, np.ones((2, 1, 5)), np.zeros(2), Activation.RELU)
    assert np.all(out == 0)
    with pytest.raises(SignalTooShortError):
        conv1d(np.ones((1, 1, 4)), np.ones((1, 1, 5)), np.zeros(1))
    with pytest.raises(ShapeError):
        conv1d(np.ones((1, 2, 8)), np.ones((1, 1, 5)), np.zeros(1))


def test_conv1d_gradients(rng):
    upstream = rng.standard_normal((1, 8, 28))
    tensors = {
        "input": rng.standard_normal((1, 1, 32)),
        "weight": rng.standard_normal((8, 1, 5)),
        "bias": rng.standard_normal(8),
    }

    def closure(t):
        out, cache = conv1d(t["input"], t["weight"], t["bias"], Activation.NONE)
        grad_input, grad_weight, grad_bias = conv1d_backward(upstream, cache)
        return float(np.sum(out * upstream)), {"input": grad_input, "weight": grad_weight, "bias": grad_bias}

    assert grad_check(closure, tensors, h=1e-5) < 1e-4


def test_conv1d_gradients_multichannel_batch(rng):
    upstream = rng.standard_normal((3, 4, 12))
    tensors = {
        "input": rng.standard_normal((3, 2, 16)),
        "weight": rng.standard_normal((4, 2, 5)),
        "bias": rng.standard_normal(4),
    }

    def closure(t):
        out, cache = conv1d(t["input"], t["weight"], t["bias"], Activation.NONE)
        grad_input, grad_weight, grad_bias = conv1d_backward(upstream, cache)
        return float(np.sum(out * upstream)), {"input": grad_input, "weight": grad_weight, "bias": grad_bias}

    assert grad_check(closure, tensors, h=1e-5) < 1e-4


# endregion


# region maxpool
def test_maxpool_examples():
    out, _ = maxpool1d(np.array([1.0, 3.0, 2.0, 5.0]).reshape(1, 1, 4))
    assert out.ravel().tolist() == [3.0, 5.0]
    out, _ = maxpool1d(np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3))
    assert out.ravel().tolist() == [2.0]


def test_maxpool_matches_brute_force(rng):
    x = rng.standard_normal((2, 3, 17))
    out, _ = maxpool1d(x)
    expected = np.array(
        [[[max(x[b, c, 2 * i], x[b, c, 2 * i + 1]) for i in range(8)] for c in range(3)] for b in range(2)]
    )
    assert np.array_equal(out, expected)


def test_maxpool_ties_route_to_first():
    x = np.array([2.0, 2.0, 1.0, 4.0]).reshape(1, 1, 4)
    _, cache = maxpool1d(x)
    grad = maxpool1d_backward(np.array([1.0, 1.0]).reshape(1, 1, 2), cache)
    assert grad.ravel().tolist() == [1.0, 0.0, 0.0, 1.0]


def test_maxpool_gradients(rng):
    upstream = rng.standard_normal((1, 1, 8))
    tensors = {"input": rng.standard_normal((1, 1, 16))}

    def closure(t):
        out, cache = maxpool1d(t["input"])
        return float(np.sum(out * upstream)), {"input": maxpool1d_backward(upstream, cache)}

    assert grad_check(closure, tensors, h=1e-5) < 1e-4


# endregion


# region dropout
@pytest.mark.parametrize("mode", list(Mode))
def test_dropout_rate_zero_is_identity(rng, mode):
    x = rng.standard_normal((2, 3, 5))
    out, mask = dropout(x, 0.0, mode, 1)
    assert out is x
    assert mask is None


def test_dropout_infer_is_identity(rng):
    x = rng.standard_normal(100)
    out, _ = dropout(x, 0.6, Mode.INFER, 1)
    assert np.array_equal(out, x)


def test_dropout_expectation():
    out, mask = dropout(np.ones(10**6), 0.6, Mode.TRAIN, 2024)
    assert 0.99 <= out.mean() <= 1.01
    assert set(np.unique(mask)) <= {0.0, 2.5}


def test_dropout_mask_is_seeded_and_reused_in_backward(rng):
    x = rng.standard_normal(1000)
    out, mask = dropout(x, 0.5, Mode.TRAIN, 7)
    again, _ = dropout(x, 0.5, Mode.TRAIN, 7)
    other, _ = dropout(x, 0.5, Mode.TRAIN, 8)
    assert np.array_equal(out, again)
    assert not np.array_equal(out, other)
    grad = dropout_backward(np.ones(1000), mask)
    assert np.array_equal(grad, mask)


def test_dropout_rejects_bad_rate():
    with pytest.raises(ConfigError) as err:
        dropout(np.ones(3), 1.0, Mode.TRAIN, 0)
    assert err.value.exit_code is ExitCode.USAGE
    with pytest.raises(ConfigError):
        dropout(np.ones(3), -0.1, Mode.INFER, 0)


# endregion


# region dense
def test_dense_identity():
    x = np.array([[1.0, -2.0, 3.0]])
    out, _ = dense(x, np.eye(3), np.zeros(3), Activation.NONE)
    assert np.array_equal(out, x)


def test_dense_relu_negative_preactivations():
    out, _ = dense(np.ones((1, 4)), -np.ones((2, 4)), np.zeros(2), Activation.RELU)
    assert np.array_equal(out, np.zeros((1, 2)))


def test_dense_shape_mismatch():
    with pytest.raises(ShapeError):
        dense(np.ones((1, 5)), np.ones((2, 4)), np.zeros(2))
    with pytest.raises(ShapeError):
        dense(np.ones((1, 4)), np.ones((2, 4)), np.zeros(3))


def test_dense_gradients(rng):
    upstream = rng.standard_normal((3, 4))
    tensors = {
        "input": rng.standard_normal((3, 8)),
        "weight": rng.standard_normal((4, 8)),
        "bias": rng.standard_normal(4),
    }

    def closure(t):
        out, cache = dense(t["input"], t["weight"], t["bias"], Activation.NONE)
        grad_input, grad_weight, grad_bias = dense_backward(upstream, cache)
        return float(np.sum(out * upstream)), {"input": grad_input, "weight": grad_weight, "bias": grad_bias}

    assert grad_check(closure, tensors, h=1e-5) < 1e-6


def test_grad_check_detects_sign_flip(rng):
    upstream = rng.standard_normal((1, 4))
    tensors = {"input": rng.standard_normal((1, 8)), "weight": rng.standard_normal((4, 8)), "bias": np.zeros(4)}

    def closure(t):
        out, cache = dense(t["input"], t["weight"], t["bias"], Activation.NONE)
        grad_input, grad_weight, grad_bias = dense_backward(upstream, cache)
        return float(np.sum(out * upstream)), {"input": -grad_input, "weight": grad_weight, "bias": grad_bias}

    assert grad_check(closure, tensors, h=1e-5) > 0.1


# endregion


# region softmax
def test_softmax_symmetric_logits():
    probs, loss, grad = softmax_xent(np.array([0.0, 0.0]), np.array([0]))
    np.testing.assert_allclose(probs, [[0.5, 0.5]])
    assert abs(loss - math.log(2)) < 1e-9
    np.testing.assert_allclose(grad, [[-0.5, 0.5]])


def test_softmax_stabilised():
    probs, loss, grad = softmax_xent(np.array([100.0, -100.0]), np.array([0]))
    assert np.all(np.isfinite(probs)) and np.all(np.isfinite(grad))
    assert 0 <= loss < 1e-8


def test_softmax_sums_to_one(rng):
    logits = rng.normal(scale=10, size=(1000, 2))
    probs, loss, _ = softmax_xent(logits, rng.integers(0, 2, size=1000))
    assert np.max(np.abs(probs.sum(axis=1) - 1)) <= 1e-12
    assert loss >= 0


def test_softmax_gradients(rng):
    labels = rng.integers(0, 2, size=5)
    tensors = {"logits": rng.standard_normal((5, 2))}

    def closure(t):
        _, loss, grad = softmax_xent(t["logits"], labels)
        return loss, {"logits": grad}

    assert grad_check(closure, tensors, h=1e-5) < 1e-6


# endregion


# region adam
def test_adam_zero_gradient_is_fixed_point():
    params = {"w": np.array([1.0, -2.0])}
    state = AdamState.for_params(params, lr=0.1)
    adam_update(params, {"w": np.zeros(2)}, state)
    assert params["w"].tolist() == [1.0, -2.0]
    assert state.t == 1


def test_adam_first_step_moves_by_lr():
    params = {"w": np.array([1.0, 1.0])}
    state = AdamState.for_params(params, lr=1e-3)
    adam_update(params, {"w": np.array([0.3, -5.0])}, state)
    np.testing.assert_allclose(params["w"], [1.0 - 1e-3, 1.0 + 1e-3], rtol=1e-7)


def test_adam_minimises_square():
    params = {"w": np.array([1.0])}
    state = AdamState.for_params(params, lr=0.1)
    for _ in range(1000):
        adam_update(params, {"w": 2 * params["w"]}, state)
    assert abs(params["w"][0]) < 0.05
    assert np.all(state.v["w"] >= 0)


def test_adam_shape_mismatch():
    params = {"w": np.zeros(3)}
    state = AdamState.for_params(params)
    with pytest.raises(ShapeError):
        adam_update(params, {"w": np.zeros(2)}, state)
    with pytest.raises(ShapeError):
        adam_update(params, {"v": np.zeros(3)}, state)


# endregion


# region checkpoint
def test_checkpoint_round_trip(tmp_path, rng):
    tensors = {"a.weight": rng.standard_normal((3, 2, 5)), "a.bias": rng.standard_normal(3), "b": np.array([np.pi])}
    path = tmp_path / "model.msc"
    save_checkpoint(path, tensors, {"input_len": "32"})
    assert path.read_bytes()[:4] == b"MSC1"

    loaded, meta = load_checkpoint(path)
    assert list(loaded) == list(tensors)
    for name, value in tensors.items():
        assert loaded[name].shape == value.shape
        assert loaded[name].tobytes() == value.tobytes()
    assert meta == {"input_len": "32"}


def test_checkpoint_rejects_bad_files(tmp_path):
    path = tmp_path / "bad.msc"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ParseError):
        load_checkpoint(path)

    save_checkpoint(path, {"w": np.ones(4)})
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ParseError):
        load_checkpoint(path)


# endregion
