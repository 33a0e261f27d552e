"""Ten-branch multiscale CNN over IMF stacks, with its training loop.

Branch ``j`` sees only IMF ``j`` of a window::

    conv(8, 5) -> ReLU -> pool(2) -> dropout -> conv(16, 5) -> ReLU -> pool(2) -> dropout

The flattened branch features are concatenated and classified by
``dense(32, ReLU) -> dropout -> dense(2) -> softmax``. Branch weights are
not shared. The residual row of an IMFSet never reaches the network.
"""

# region #-- imports --#
from __future__ import annotations

import copy
import dataclasses
import logging
import os
import statistics
import time
from collections.abc import Callable, Mapping
from typing import Any

import numpy as np
import voluptuous as vol

from .ceemdan import IMFSet, derive_seed
from .const import (
    DEF_BATCH_SIZE,
    DEF_K,
    DEF_LR,
    DEF_MAX_EPOCHS,
    DEF_PATIENCE,
    DEF_SEED,
    DEF_WINDOW_LEN,
    KERNEL_WIDTH,
    MIN_INPUT_LEN,
    MIN_VAL_IMPROVEMENT,
    POOL_WIDTH,
    STD_FLOOR,
    U64_MASK,
    Activation,
    Mode,
)
from .dataset import WindowedDataset
from .decorators import needs_decomposed
from .exceptions import (
    ConfigError,
    EmptyPartitionError,
    NumericError,
    ShapeError,
)
from .logger import Logger
from .neuralnet import (
    AdamState,
    Conv1dCache,
    DenseCache,
    PoolCache,
    Tensors,
    adam_update,
    conv1d,
    conv1d_backward,
    dense,
    dense_backward,
    dropout,
    dropout_backward,
    kaiming_normal,
    load_checkpoint,
    maxpool1d,
    maxpool1d_backward,
    save_checkpoint,
    softmax_xent,
)

# endregion

_LOGGER = logging.getLogger(__name__)

_POSITIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=1))
_DROP_RATE = vol.All(vol.Coerce(float), vol.Range(min=0, max=1, max_included=False))

MODEL_SCHEMA = vol.Schema(
    {
        vol.Required("k_branches"): _POSITIVE_INT,
        vol.Required("input_len"): vol.All(vol.Coerce(int), vol.Range(min=MIN_INPUT_LEN)),
        vol.Required("conv1_filters"): _POSITIVE_INT,
        vol.Required("conv2_filters"): _POSITIVE_INT,
        vol.Required("kernel_width"): vol.All(vol.Coerce(int), vol.Equal(KERNEL_WIDTH)),
        vol.Required("pool_width"): vol.All(vol.Coerce(int), vol.Equal(POOL_WIDTH)),
        vol.Required("drop_branch"): _DROP_RATE,
        vol.Required("hidden"): _POSITIVE_INT,
        vol.Required("drop_head"): _DROP_RATE,
        vol.Required("classes"): vol.All(vol.Coerce(int), vol.Equal(2)),
    }
)


def _patience_within_epochs(data: dict) -> dict:
    """Patience can never exceed the epoch budget."""
    if data["patience"] > data["max_epochs"]:
        raise vol.Invalid("patience must not exceed max_epochs")
    return data


TRAIN_SCHEMA = vol.Schema(
    vol.All(
        {
            vol.Required("lr"): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
            vol.Required("batch_size"): _POSITIVE_INT,
            vol.Required("max_epochs"): _POSITIVE_INT,
            vol.Required("patience"): _POSITIVE_INT,
            vol.Required("seed"): vol.All(vol.Coerce(int), vol.Range(min=0, max=U64_MASK)),
        },
        _patience_within_epochs,
    )
)


# region #-- configuration --#
@dataclasses.dataclass(frozen=True)
class ModelSpec:
    """Architecture of the network."""

    k_branches: int = DEF_K
    input_len: int = DEF_WINDOW_LEN
    conv1_filters: int = 8
    conv2_filters: int = 16
    kernel_width: int = KERNEL_WIDTH
    pool_width: int = POOL_WIDTH
    drop_branch: float = 0.6
    hidden: int = 32
    drop_head: float = 0.7
    classes: int = 2

    def __post_init__(self) -> None:
        """Validate the architecture."""
        try:
            MODEL_SCHEMA(dataclasses.asdict(self))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=self.__class__.__name__) from err

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> ModelSpec:
        """Build from loosely typed input, e.g. checkpoint metadata."""
        defaults = dataclasses.asdict(cls())
        fields = {key: value for key, value in data.items() if key in defaults}
        try:
            return cls(**MODEL_SCHEMA({**defaults, **fields}))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=cls.__name__) from err

    def to_meta(self) -> dict[str, str]:
        """Text form stored in checkpoints."""
        return {key: repr(value) for key, value in dataclasses.asdict(self).items()}

    @property
    def branch_lengths(self) -> tuple[int, int, int, int]:
        """Sequence lengths after conv1, pool1, conv2 and pool2."""
        conv1 = self.input_len - self.kernel_width + 1
        pool1 = conv1 // self.pool_width
        conv2 = pool1 - self.kernel_width + 1
        pool2 = conv2 // self.pool_width
        return conv1, pool1, conv2, pool2

    @property
    def branch_flatten(self) -> int:
        """Feature length produced by one branch."""
        return self.conv2_filters * self.branch_lengths[3]

    @property
    def concat_len(self) -> int:
        """Length of the concatenated feature vector."""
        return self.k_branches * self.branch_flatten

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Every parameter tensor in declared order."""
        shapes: dict[str, tuple[int, ...]] = {}
        for branch in range(self.k_branches):
            shapes[f"branch{branch}.conv1.weight"] = (self.conv1_filters, 1, self.kernel_width)
            shapes[f"branch{branch}.conv1.bias"] = (self.conv1_filters,)
            shapes[f"branch{branch}.conv2.weight"] = (
                self.conv2_filters,
                self.conv1_filters,
                self.kernel_width,
            )
            shapes[f"branch{branch}.conv2.bias"] = (self.conv2_filters,)
        shapes["head.fc1.weight"] = (self.hidden, self.concat_len)
        shapes["head.fc1.bias"] = (self.hidden,)
        shapes["head.fc2.weight"] = (self.classes, self.hidden)
        shapes["head.fc2.bias"] = (self.classes,)
        return shapes

    def parameter_count(self) -> int:
        """Total number of trainable scalars."""
        return sum(int(np.prod(shape)) for shape in self.param_shapes().values())

    def summary(self) -> str:
        """Human readable layer table."""
        conv1, pool1, conv2, pool2 = self.branch_lengths
        lines = [
            f"input: {self.k_branches} IMFs x {self.input_len} samples",
            f"branch (x{self.k_branches}, unshared):",
            f"  conv1  {self.conv1_filters} x {conv1}  (width {self.kernel_width}, ReLU)",
            f"  pool1  {self.conv1_filters} x {pool1}  (dropout {self.drop_branch})",
            f"  conv2  {self.conv2_filters} x {conv2}  (width {self.kernel_width}, ReLU)",
            f"  pool2  {self.conv2_filters} x {pool2}  (dropout {self.drop_branch})",
            f"  flatten {self.branch_flatten}",
            f"concat {self.concat_len}",
            f"dense  {self.hidden}  (ReLU, dropout {self.drop_head})",
            f"dense  {self.classes}  (softmax)",
            f"parameters: {self.parameter_count()}",
        ]
        return "\n".join(lines)


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Optimiser and stopping settings."""

    lr: float = DEF_LR
    batch_size: int = DEF_BATCH_SIZE
    max_epochs: int = DEF_MAX_EPOCHS
    patience: int = DEF_PATIENCE
    seed: int = DEF_SEED

    def __post_init__(self) -> None:
        """Validate the configuration."""
        try:
            TRAIN_SCHEMA(dataclasses.asdict(self))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=self.__class__.__name__) from err

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> TrainConfig:
        """Build from loosely typed input, e.g. CLI options."""
        defaults = dataclasses.asdict(cls())
        try:
            return cls(**TRAIN_SCHEMA({**defaults, **data}))
        except vol.Invalid as err:
            raise ConfigError(str(err), context=cls.__name__) from err


# endregion


# region #-- history --#
@dataclasses.dataclass(frozen=True)
class EpochRecord:
    """Outcome of one training epoch."""

    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    # wall clock is excluded from equality so reruns compare equal
    seconds: float = dataclasses.field(default=0.0, compare=False)


@dataclasses.dataclass
class TrainHistory:
    """Per-epoch records plus the early-stopping outcome."""

    epochs: list[EpochRecord] = dataclasses.field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def __len__(self) -> int:
        """Number of completed epochs."""
        return len(self.epochs)

    @property
    def train_loss(self) -> list[float]:
        """Mean training loss per epoch."""
        return [record.train_loss for record in self.epochs]

    @property
    def val_loss(self) -> list[float]:
        """Validation loss per epoch."""
        return [record.val_loss for record in self.epochs]

    @property
    def val_acc(self) -> list[float]:
        """Validation accuracy per epoch."""
        return [record.val_acc for record in self.epochs]

    @property
    def best_val_acc(self) -> float:
        """Validation accuracy at the best epoch."""
        if not self.best_epoch:
            return 0.0
        return self.epochs[self.best_epoch - 1].val_acc

    @property
    def seconds_per_epoch(self) -> float:
        """Median epoch wall-clock time."""
        if not self.epochs:
            return 0.0
        return statistics.median(record.seconds for record in self.epochs)


class EarlyStopping:
    """Track the best validation loss and decide when training stagnates."""

    def __init__(self, patience: int, min_delta: float = MIN_VAL_IMPROVEMENT) -> None:
        """Initialise."""
        self.patience = patience
        self.min_delta = min_delta
        self.best_loss = float("inf")
        self.best_epoch = 0
        self._stale = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record an epoch; ``True`` when it is the new best."""
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self._stale = 0
            return True
        self._stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        """Whether ``patience`` epochs have passed without improvement."""
        return self._stale >= self.patience


# endregion


# region #-- parameters --#
@dataclasses.dataclass(eq=False)
class ModelParams:
    """Named parameter tensors of one network."""

    spec: ModelSpec
    tensors: Tensors

    def __post_init__(self) -> None:
        """Check every tensor against the architecture."""
        expected = self.spec.param_shapes()
        if list(self.tensors) != list(expected):
            raise ShapeError("ModelParams", expected=list(expected), actual=list(self.tensors))
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ShapeError(name, expected=shape, actual=self.tensors[name].shape)

    def __getitem__(self, name: str) -> np.ndarray:
        """Tensor by name."""
        return self.tensors[name]

    def copy(self) -> ModelParams:
        """Deep copy of the tensors."""
        return ModelParams(spec=self.spec, tensors=copy.deepcopy(self.tensors))

    def save(self, path: str | os.PathLike) -> None:
        """Write an ``MSC1`` checkpoint carrying the architecture."""
        save_checkpoint(path, self.tensors, self.spec.to_meta())

    @classmethod
    def load(cls, path: str | os.PathLike) -> ModelParams:
        """Read an ``MSC1`` checkpoint."""
        tensors, meta = load_checkpoint(path)
        return cls(spec=ModelSpec.from_mapping(meta), tensors=tensors)


def build(spec: ModelSpec, seed: int = DEF_SEED) -> ModelParams:
    """Allocate seeded parameters: Kaiming-normal weights, zero biases."""
    generator = np.random.Generator(np.random.Philox(key=derive_seed(seed, "init") & U64_MASK))
    tensors: Tensors = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = kaiming_normal(shape, fan_in, generator)
    return ModelParams(spec=spec, tensors=tensors)


# endregion


# region #-- forward / backward --#
def standardize(imfs: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per IMF row of each sample."""
    imfs = np.asarray(imfs, dtype=np.float64)
    mean = imfs.mean(axis=-1, keepdims=True)
    std = np.maximum(imfs.std(axis=-1, keepdims=True), STD_FLOOR)
    return (imfs - mean) / std


def prepare_input(samples: IMFSet | np.ndarray | list, spec: ModelSpec) -> np.ndarray:
    """Stack IMFs as a standardized ``(batch, k, length)`` array."""
    if isinstance(samples, IMFSet):
        stack = samples.imfs[None]
    elif isinstance(samples, list | tuple):
        stack = np.stack([s.imfs if isinstance(s, IMFSet) else s for s in samples])
    else:
        stack = np.asarray(samples, dtype=np.float64)
        if stack.ndim == 2:
            stack = stack[None]
    if stack.shape[1:] != (spec.k_branches, spec.input_len):
        raise ShapeError(
            "model input", expected=(spec.k_branches, spec.input_len), actual=stack.shape[1:]
        )
    return standardize(stack)


@dataclasses.dataclass
class BranchCache:
    """Intermediate state of one branch."""

    conv1: Conv1dCache
    pool1: PoolCache
    mask1: np.ndarray | None
    conv2: Conv1dCache
    pool2: PoolCache
    mask2: np.ndarray | None
    pooled_shape: tuple[int, ...]


@dataclasses.dataclass
class ForwardCache:
    """Everything backward needs, plus the concatenated features."""

    branches: list[BranchCache]
    features: np.ndarray
    fc1: DenseCache
    head_mask: np.ndarray | None
    fc2: DenseCache
    logits: np.ndarray


def forward_batch(
    params: ModelParams, x: np.ndarray, mode: Mode = Mode.INFER, seed: int = DEF_SEED
) -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities for a standardized ``(batch, k, length)`` input."""
    spec = params.spec
    if x.ndim != 3 or x.shape[1:] != (spec.k_branches, spec.input_len):
        raise ShapeError("forward", expected=(spec.k_branches, spec.input_len), actual=x.shape)

    branches: list[BranchCache] = []
    features: list[np.ndarray] = []
    for branch in range(spec.k_branches):
        prefix = f"branch{branch}"
        out, conv1_cache = conv1d(
            x[:, branch : branch + 1, :],
            params[f"{prefix}.conv1.weight"],
            params[f"{prefix}.conv1.bias"],
            Activation.RELU,
        )
        out, pool1_cache = maxpool1d(out, spec.pool_width)
        out, mask1 = dropout(out, spec.drop_branch, mode, derive_seed(seed, branch, 1))
        out, conv2_cache = conv1d(
            out, params[f"{prefix}.conv2.weight"], params[f"{prefix}.conv2.bias"], Activation.RELU
        )
        out, pool2_cache = maxpool1d(out, spec.pool_width)
        out, mask2 = dropout(out, spec.drop_branch, mode, derive_seed(seed, branch, 2))
        branches.append(
            BranchCache(conv1_cache, pool1_cache, mask1, conv2_cache, pool2_cache, mask2, out.shape)
        )
        features.append(out.reshape(out.shape[0], -1))

    concat = np.concatenate(features, axis=1)
    hidden, fc1_cache = dense(concat, params["head.fc1.weight"], params["head.fc1.bias"], Activation.RELU)
    hidden, head_mask = dropout(hidden, spec.drop_head, mode, derive_seed(seed, "head"))
    logits, fc2_cache = dense(hidden, params["head.fc2.weight"], params["head.fc2.bias"], Activation.NONE)

    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, ForwardCache(branches, concat, fc1_cache, head_mask, fc2_cache, logits)


def backward(
    params: ModelParams, cache: ForwardCache, grad_logits: np.ndarray
) -> tuple[Tensors, np.ndarray]:
    """Parameter gradients and the gradient on the standardized input."""
    spec = params.spec
    grads: Tensors = {}

    grad_hidden, grads["head.fc2.weight"], grads["head.fc2.bias"] = dense_backward(
        grad_logits, cache.fc2
    )
    grad_hidden = dropout_backward(grad_hidden, cache.head_mask)
    grad_concat, grads["head.fc1.weight"], grads["head.fc1.bias"] = dense_backward(
        grad_hidden, cache.fc1
    )

    batch = grad_concat.shape[0]
    grad_input = np.zeros((batch, spec.k_branches, spec.input_len), dtype=np.float64)
    for branch, branch_cache in enumerate(cache.branches):
        prefix = f"branch{branch}"
        start = branch * spec.branch_flatten
        grad = grad_concat[:, start : start + spec.branch_flatten].reshape(branch_cache.pooled_shape)
        grad = dropout_backward(grad, branch_cache.mask2)
        grad = maxpool1d_backward(grad, branch_cache.pool2)
        grad, grads[f"{prefix}.conv2.weight"], grads[f"{prefix}.conv2.bias"] = conv1d_backward(
            grad, branch_cache.conv2
        )
        grad = dropout_backward(grad, branch_cache.mask1)
        grad = maxpool1d_backward(grad, branch_cache.pool1)
        grad, grads[f"{prefix}.conv1.weight"], grads[f"{prefix}.conv1.bias"] = conv1d_backward(
            grad, branch_cache.conv1
        )
        grad_input[:, branch, :] = grad[:, 0, :]

    return {name: grads[name] for name in params.tensors}, grad_input


def loss_and_grads(
    params: ModelParams,
    x: np.ndarray,
    labels: np.ndarray,
    mode: Mode = Mode.TRAIN,
    seed: int = DEF_SEED,
) -> tuple[float, Tensors, np.ndarray, np.ndarray]:
    """Mean cross-entropy of a batch with gradients on parameters and input."""
    probs, cache = forward_batch(params, x, mode, seed)
    _, loss, grad_logits = softmax_xent(cache.logits, labels)
    grads, grad_input = backward(params, cache, grad_logits)
    return loss, grads, grad_input, probs


def forward(
    params: ModelParams, sample: IMFSet, mode: Mode = Mode.INFER, seed: int = DEF_SEED
) -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities for a single decomposed window."""
    if sample.k != params.spec.k_branches or sample.source_length != params.spec.input_len:
        raise ShapeError(
            "forward",
            expected=(params.spec.k_branches, params.spec.input_len),
            actual=(sample.k, sample.source_length),
        )
    probs, cache = forward_batch(params, prepare_input(sample, params.spec), mode, seed)
    return probs[0], cache


# endregion


# region #-- training --#
def _labels_from_probs(probs: np.ndarray) -> np.ndarray:
    """Argmax over two classes; exact ties go to class 0."""
    return (probs[:, 1] > probs[:, 0]).astype(np.int64)


def _check_dataset(ds: WindowedDataset, spec: ModelSpec, partition: str) -> None:
    """Reject empty or mis-shaped datasets."""
    if len(ds) == 0:
        raise EmptyPartitionError(partition, 0)
    if ds.window_len != spec.input_len:
        raise ShapeError(partition, expected=spec.input_len, actual=ds.window_len)
    k = ds.samples[0].k
    if k != spec.k_branches:
        raise ShapeError(partition, expected=spec.k_branches, actual=k)


def _batch_input(samples: tuple[IMFSet, ...], idx: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Standardized input for the samples at ``idx``."""
    return prepare_input([samples[i] for i in idx], spec)


def evaluate_loss(
    params: ModelParams, ds: WindowedDataset, batch_size: int = 64
) -> tuple[float, float]:
    """Infer-mode mean loss and accuracy over a decomposed dataset."""
    total_loss = 0.0
    correct = 0
    for start in range(0, len(ds), batch_size):
        idx = np.arange(start, min(start + batch_size, len(ds)))
        probs, cache = forward_batch(params, _batch_input(ds.samples, idx, params.spec), Mode.INFER)
        _, loss, _ = softmax_xent(cache.logits, ds.labels[idx])
        total_loss += loss * idx.size
        correct += int(np.count_nonzero(_labels_from_probs(probs) == ds.labels[idx]))
    return total_loss / len(ds), correct / len(ds)


ValidationFn = Callable[[ModelParams, int], tuple[float, float]]
EpochCallback = Callable[[EpochRecord], None]


@needs_decomposed
def fit(
    train: WindowedDataset,
    val: WindowedDataset,
    spec: ModelSpec,
    cfg: TrainConfig,
    on_epoch: EpochCallback | None = None,
    validate: ValidationFn | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Train with Adam and early stopping; return the best-validation weights.

    ``validate(params, epoch) -> (val_loss, val_acc)`` replaces the default
    infer-mode pass over ``val``.
    """
    log_formatter = Logger(unique_id=f"seed={cfg.seed}")
    _LOGGER.debug(log_formatter.format("entered"))
    _check_dataset(train, spec, "train")
    _check_dataset(val, spec, "validation")

    if validate is None:

        def validate(model: ModelParams, _epoch: int) -> tuple[float, float]:
            """Infer-mode pass over the validation set."""
            return evaluate_loss(model, val)

    params = build(spec, cfg.seed)
    state = AdamState.for_params(params.tensors, lr=cfg.lr)
    stopper = EarlyStopping(cfg.patience)
    history = TrainHistory()
    best = params.copy()

    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        order = np.random.Generator(
            np.random.Philox(key=derive_seed(cfg.seed, "epoch", epoch) & U64_MASK)
        ).permutation(len(train))

        total_loss = 0.0
        for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss, grads, _, _ = loss_and_grads(
                params,
                _batch_input(train.samples, idx, spec),
                train.labels[idx],
                Mode.TRAIN,
                derive_seed(cfg.seed, "dropout", epoch, batch),
            )
            if not np.isfinite(loss):
                raise NumericError(context=f"epoch {epoch}, batch {batch}")
            adam_update(params.tensors, grads, state)
            total_loss += loss * idx.size

        val_loss, val_acc = validate(params, epoch)
        if not np.isfinite(val_loss):
            raise NumericError(context=f"epoch {epoch}, validation")
        record = EpochRecord(
            epoch=epoch,
            train_loss=total_loss / len(order),
            val_loss=float(val_loss),
            val_acc=float(val_acc),
            seconds=time.perf_counter() - started,
        )
        history.epochs.append(record)
        if stopper.update(epoch, record.val_loss):
            best = params.copy()
        _LOGGER.info(
            log_formatter.format("epoch %d: train %.6f, val %.6f, acc %.4f"),
            epoch,
            record.train_loss,
            record.val_loss,
            record.val_acc,
        )
        if on_epoch is not None:
            on_epoch(record)
        if stopper.should_stop:
            history.stopped_early = epoch < cfg.max_epochs
            break

    history.best_epoch = stopper.best_epoch
    _LOGGER.debug(
        log_formatter.format("exited, best epoch %d of %d"), history.best_epoch, len(history)
    )
    return best, history


@needs_decomposed
def predict(
    params: ModelParams, ds: WindowedDataset, batch_size: int = 64
) -> tuple[np.ndarray, np.ndarray, float]:
    """Infer-mode labels, probabilities and wall-clock seconds per sample."""
    if len(ds) == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, params.spec.classes)), 0.0
    _check_dataset(ds, params.spec, "predict")

    started = time.perf_counter()
    probs = np.concatenate(
        [
            forward_batch(
                params,
                _batch_input(ds.samples, np.arange(start, min(start + batch_size, len(ds))), params.spec),
                Mode.INFER,
            )[0]
            for start in range(0, len(ds), batch_size)
        ]
    )
    elapsed = time.perf_counter() - started
    return _labels_from_probs(probs), probs, elapsed / len(ds)


# endregion
