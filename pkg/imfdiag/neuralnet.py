"""Differentiable building blocks for the multiscale CNN.

Every layer is a forward function returning ``(output, cache)`` plus a
matching ``*_backward`` returning exact analytic gradients. Activations are
batched float64 arrays: ``(batch, channels, length)`` for the convolutional
part and ``(batch, features)`` for the dense head. Batch losses are means, so
gradients are averaged over the batch.
"""

# region #-- imports --#
from __future__ import annotations

import dataclasses
import logging
import os
import struct
from collections.abc import Callable, Mapping
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .const import (
    CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
    DEF_ADAM_BETA1,
    DEF_ADAM_BETA2,
    DEF_ADAM_EPS,
    DEF_LR,
    POOL_WIDTH,
    U64_MASK,
    Activation,
    Mode,
)
from .exceptions import ConfigError, NonFiniteError, ParseError, ShapeError, SignalTooShortError

# endregion

_LOGGER = logging.getLogger(__name__)

Tensors = dict[str, np.ndarray]


def tensor_view(data: np.ndarray, channels: int, length: int) -> np.ndarray:
    """Validate a flat buffer and view it as ``(channels, length)``."""
    data = np.asarray(data, dtype=np.float64)
    if data.size != channels * length:
        raise ShapeError("tensor", expected=(channels, length), actual=data.shape)
    if not np.all(finite := np.isfinite(data.ravel())):
        raise NonFiniteError(context="tensor", index=int(np.argmin(finite)))
    return data.reshape(channels, length)


def kaiming_normal(
    shape: tuple[int, ...], fan_in: int, generator: np.random.Generator
) -> np.ndarray:
    """He-normal initialisation, std = sqrt(2 / fan_in)."""
    return generator.standard_normal(shape) * np.sqrt(2.0 / fan_in)


# region #-- convolution --#
class Conv1dCache(NamedTuple):
    """What conv1d_backward needs."""

    windows: np.ndarray
    weights: np.ndarray
    output: np.ndarray
    activation: Activation
    input_length: int


def conv1d(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    activation: Activation = Activation.RELU,
) -> tuple[np.ndarray, Conv1dCache]:
    """Valid cross-correlation, stride 1: ``(N, C_in, L) -> (N, C_out, L - W + 1)``."""
    out_ch, in_ch, width = weights.shape
    if x.ndim != 3 or x.shape[1] != in_ch:
        raise ShapeError("conv1d input", expected=("N", in_ch, "L"), actual=x.shape)
    if bias.shape != (out_ch,):
        raise ShapeError("conv1d bias", expected=(out_ch,), actual=bias.shape)
    if x.shape[2] < width:
        raise SignalTooShortError("conv1d", length=x.shape[2], required=width)

    windows = sliding_window_view(x, width, axis=2)  # (N, C_in, L', W)
    out = np.tensordot(windows, weights, axes=([1, 3], [1, 2]))  # (N, L', C_out)
    out = np.ascontiguousarray(out.transpose(0, 2, 1)) + bias[None, :, None]
    if Activation(activation) is Activation.RELU:
        out = np.maximum(out, 0.0)
    return out, Conv1dCache(windows, weights, out, Activation(activation), x.shape[2])


def conv1d_backward(
    grad_out: np.ndarray, cache: Conv1dCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients with respect to input, weights and bias."""
    if cache.activation is Activation.RELU:
        grad_out = grad_out * (cache.output > 0)
    _, in_ch, width = cache.weights.shape
    out_len = grad_out.shape[2]

    grad_weights = np.tensordot(grad_out, cache.windows, axes=([0, 2], [0, 2]))
    grad_bias = grad_out.sum(axis=(0, 2))
    grad_input = np.zeros((grad_out.shape[0], in_ch, cache.input_length), dtype=np.float64)
    for tap in range(width):
        grad_input[:, :, tap : tap + out_len] += np.matmul(cache.weights[:, :, tap].T, grad_out)
    return grad_input, grad_weights, grad_bias


# endregion


# region #-- pooling --#
class PoolCache(NamedTuple):
    """What maxpool1d_backward needs."""

    argmax: np.ndarray
    input_shape: tuple[int, ...]
    width: int


def maxpool1d(x: np.ndarray, width: int = POOL_WIDTH) -> tuple[np.ndarray, PoolCache]:
    """Non-overlapping max pooling; a trailing partial window is dropped."""
    if x.shape[-1] < width:
        raise SignalTooShortError("maxpool1d", length=x.shape[-1], required=width)
    pooled_len = x.shape[-1] // width
    blocks = x[..., : pooled_len * width].reshape(*x.shape[:-1], pooled_len, width)
    argmax = blocks.argmax(axis=-1)  # ties go to the first element
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return out, PoolCache(argmax, x.shape, width)


def maxpool1d_backward(grad_out: np.ndarray, cache: PoolCache) -> np.ndarray:
    """Route each gradient to the element that won its window."""
    pooled_len = grad_out.shape[-1]
    blocks = np.zeros((*grad_out.shape, cache.width), dtype=np.float64)
    np.put_along_axis(blocks, cache.argmax[..., None], grad_out[..., None], axis=-1)
    grad_input = np.zeros(cache.input_shape, dtype=np.float64)
    grad_input[..., : pooled_len * cache.width] = blocks.reshape(*grad_out.shape[:-1], -1)
    return grad_input


# endregion


# region #-- dropout --#
def dropout(
    x: np.ndarray, rate: float, mode: Mode, mask_seed: int
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: identity at inference, scaled survivors in training."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError("dropout rate must be in [0, 1)", context=rate)
    if Mode(mode) is Mode.INFER or rate == 0.0:
        return x, None
    generator = np.random.Generator(np.random.Philox(key=mask_seed & U64_MASK))
    mask = (generator.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad_out: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Apply the same scaled mask to the incoming gradient."""
    return grad_out if mask is None else grad_out * mask


# endregion


# region #-- dense --#
class DenseCache(NamedTuple):
    """What dense_backward needs."""

    inputs: np.ndarray
    weights: np.ndarray
    output: np.ndarray
    activation: Activation


def dense(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    activation: Activation = Activation.NONE,
) -> tuple[np.ndarray, DenseCache]:
    """Affine map ``(N, in) -> (N, out)`` with optional ReLU."""
    out_features, in_features = weights.shape
    if x.ndim != 2 or x.shape[1] != in_features:
        raise ShapeError("dense input", expected=("N", in_features), actual=x.shape)
    if bias.shape != (out_features,):
        raise ShapeError("dense bias", expected=(out_features,), actual=bias.shape)
    out = x @ weights.T + bias
    if Activation(activation) is Activation.RELU:
        out = np.maximum(out, 0.0)
    return out, DenseCache(x, weights, out, Activation(activation))


def dense_backward(
    grad_out: np.ndarray, cache: DenseCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients with respect to input, weights and bias."""
    if cache.activation is Activation.RELU:
        grad_out = grad_out * (cache.output > 0)
    return grad_out @ cache.weights, grad_out.T @ cache.inputs, grad_out.sum(axis=0)


# endregion


def softmax_xent(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, float, np.ndarray]:
    """Softmax probabilities, mean cross-entropy and its gradient on the logits."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (logits.shape[0],):
        raise ShapeError("softmax_xent labels", expected=(logits.shape[0],), actual=labels.shape)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    probs = np.exp(log_probs)

    rows = np.arange(labels.size)
    loss = float(-log_probs[rows, labels].mean())
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return probs, loss, grad / labels.size


# region #-- optimiser --#
@dataclasses.dataclass
class AdamState:
    """Moments and hyper-parameters of the Adam optimiser."""

    m: Tensors
    v: Tensors
    t: int = 0
    lr: float = DEF_LR
    beta1: float = DEF_ADAM_BETA1
    beta2: float = DEF_ADAM_BETA2
    eps_stab: float = DEF_ADAM_EPS

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], lr: float = DEF_LR, **kwargs) -> AdamState:
        """Zero moments shaped like ``params``."""
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
            lr=lr,
            **kwargs,
        )


def adam_update(
    params: Tensors, grads: Mapping[str, np.ndarray], state: AdamState
) -> tuple[Tensors, AdamState]:
    """One bias-corrected Adam step, applied in place."""
    if grads.keys() != params.keys():
        raise ShapeError("adam_update", expected=sorted(params), actual=sorted(grads))

    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.shape:
            raise ShapeError(f"adam_update {name}", expected=param.shape, actual=grad.shape)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(grad)
        param -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps_stab)
    return params, state


# endregion


def grad_check(
    closure: Callable[[Tensors], tuple[float, Mapping[str, np.ndarray]]],
    tensors: Tensors,
    h: float = 1e-5,
    floor: float = 1e-12,
    max_per_tensor: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``closure(tensors)`` returns ``(loss, grads)`` with a gradient for every
    entry of ``tensors`` (parameters and inputs alike). Every element is
    probed unless ``max_per_tensor`` limits it to a seeded random subset.
    The error of an element is ``|g - g_fd| / max(|g|, |g_fd|, floor)``.
    """
    _, analytic = closure(tensors)
    generator = np.random.default_rng(seed)
    worst = 0.0

    for name, tensor in tensors.items():
        flat = tensor.reshape(-1)
        indices = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            indices = np.sort(generator.choice(flat.size, size=max_per_tensor, replace=False))
        grad = np.asarray(analytic[name]).reshape(-1)

        for idx in indices:
            original = flat[idx]
            flat[idx] = original + h
            loss_plus, _ = closure(tensors)
            flat[idx] = original - h
            loss_minus, _ = closure(tensors)
            flat[idx] = original

            numeric = (loss_plus - loss_minus) / (2.0 * h)
            denominator = max(abs(grad[idx]), abs(numeric), floor)
            error = abs(grad[idx] - numeric) / denominator
            if error > worst:
                _LOGGER.debug("grad_check %s[%d]: analytic %g, numeric %g", name, idx, grad[idx], numeric)
                worst = error
    return worst


# region #-- checkpoint --#
def save_checkpoint(
    path: str | os.PathLike, tensors: Mapping[str, np.ndarray], meta: Mapping[str, str] | None = None
) -> None:
    """Write ``MSC1``: metadata block, layer table, then f64le values in order."""
    meta_blob = ";".join(f"{key}={value}" for key, value in (meta or {}).items()).encode()
    blob = bytearray()
    blob += struct.pack("<4sII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(meta_blob))
    blob += meta_blob
    blob += struct.pack("<I", len(tensors))
    for name, value in tensors.items():
        encoded = name.encode()
        blob += struct.pack(f"<H{len(encoded)}sB", len(encoded), encoded, value.ndim)
        blob += struct.pack(f"<{value.ndim}I", *value.shape)
    for value in tensors.values():
        blob += np.ascontiguousarray(value, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | os.PathLike) -> tuple[Tensors, dict[str, str]]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        magic, version, meta_len = struct.unpack_from("<4sII", raw, offset=0)
        if magic != CHECKPOINT_MAGIC or version != CHECKPOINT_VERSION:
            raise ParseError(path, "offset 0", f"Unsupported checkpoint {magic!r} v{version}")
        pos = struct.calcsize("<4sII")
        meta_blob = raw[pos : pos + meta_len].decode()
        pos += meta_len
        meta = dict(item.split("=", 1) for item in meta_blob.split(";") if item)

        (count,) = struct.unpack_from("<I", raw, offset=pos)
        pos += struct.calcsize("<I")
        table: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, offset=pos)
            pos += struct.calcsize("<H")
            name, ndim = struct.unpack_from(f"<{name_len}sB", raw, offset=pos)
            pos += struct.calcsize(f"<{name_len}sB")
            shape = struct.unpack_from(f"<{ndim}I", raw, offset=pos)
            pos += struct.calcsize(f"<{ndim}I")
            table.append((name.decode(), tuple(shape)))

        tensors: Tensors = {}
        for name, shape in table:
            size = int(np.prod(shape, dtype=np.int64))
            if pos + size * 8 > len(raw):
                raise ParseError(path, f"offset {pos}", f"Truncated values for {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
            pos += size * 8
    except struct.error as err:
        raise ParseError(path, "header", str(err)) from err
    if pos != len(raw):
        raise ParseError(path, f"offset {pos}", "Trailing bytes")
    return tensors, meta


# endregion
