"""Small from-scratch classifier trained by mini-batch SGD with momentum.

A one-hidden-layer tanh network (``hidden_size=0`` gives softmax
regression) with cross-entropy loss, step learning-rate decay, early
stopping on validation loss, and best-snapshot restoration. The training
loop consumes whatever epoch order the scheduler (or the random baseline)
emits.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable

import numpy as np

from .metrics import weighted_f1
from .scheduler import EpochOrder

LOG_FLOOR = 1e-12
CHECKPOINT_FORMAT = "curriculum-classifier"
CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    """Invalid hyperparameter."""


class DivergenceError(FloatingPointError):
    """Non-finite loss or gradient during training."""


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 15
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 20
    hidden_size: int = 32
    keep_last_batch: bool = True

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if not self.lr_decay_factor > 0:
            raise ConfigError("lr_decay_factor must be positive")
        for name in ("lr_decay_every", "batch_size", "max_epochs", "patience"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value >= 1):
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not (isinstance(self.hidden_size, (int, np.integer)) and self.hidden_size >= 0):
            raise ConfigError("hidden_size must be a non-negative integer")

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay_factor ** (epoch // self.lr_decay_every)

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown model fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Snapshot:
    epoch: int
    validation_loss: float
    params: dict[str, np.ndarray]


@dataclass
class ClassifierState:
    params: dict[str, np.ndarray]
    momentum_buffers: dict[str, np.ndarray]
    hyperparams: Hyperparams
    best_snapshot: Snapshot | None = None

    @property
    def n_features(self) -> int:
        return int(self.params["W1" if "W1" in self.params else "W"].shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.params["b2" if "b2" in self.params else "b"].shape[0])

    def copy(self) -> "ClassifierState":
        snap = None
        if self.best_snapshot is not None:
            snap = Snapshot(
                self.best_snapshot.epoch,
                self.best_snapshot.validation_loss,
                _copy(self.best_snapshot.params),
            )
        return ClassifierState(
            _copy(self.params), _copy(self.momentum_buffers), self.hyperparams, snap
        )


@dataclass(frozen=True)
class Prediction:
    posterior: np.ndarray
    predicted_class: int


@dataclass
class EpochRecord:
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: float
    val_f1: float
    prob_sum_error: float = 0.0
    max_prob_deviation: float = 0.0


@dataclass
class TrainResult:
    state: ClassifierState
    trajectory: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def _copy(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def init_classifier(
    n_features: int, n_classes: int, hyperparams: Hyperparams, rng: np.random.Generator
) -> ClassifierState:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
    if n_features < 1 or n_classes < 2:
        raise ConfigError("need at least one feature and two classes")
    h = hyperparams.hidden_size
    if h == 0:
        bound = 1.0 / math.sqrt(n_features)
        params = {
            "W": rng.uniform(-bound, bound, size=(n_features, n_classes)),
            "b": np.zeros(n_classes),
        }
    else:
        b1 = 1.0 / math.sqrt(n_features)
        b2 = 1.0 / math.sqrt(h)
        params = {
            "W1": rng.uniform(-b1, b1, size=(n_features, h)),
            "b1": np.zeros(h),
            "W2": rng.uniform(-b2, b2, size=(h, n_classes)),
            "b2": np.zeros(n_classes),
        }
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    return ClassifierState(params, velocity, hyperparams)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(params: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if "W1" in params:
        if X.shape[1] != params["W1"].shape[0]:
            raise ValueError(
                f"feature dimension {X.shape[1]} does not match model input {params['W1'].shape[0]}"
            )
        hidden = np.tanh(X @ params["W1"] + params["b1"])
        return softmax(hidden @ params["W2"] + params["b2"])
    if X.shape[1] != params["W"].shape[0]:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match model input {params['W'].shape[0]}"
        )
    return softmax(X @ params["W"] + params["b"])


def forward(state: ClassifierState, features: np.ndarray) -> Prediction:
    posterior = predict_proba(state.params, np.asarray(features, dtype=np.float64).reshape(1, -1))[0]
    return Prediction(posterior, int(np.argmax(posterior)))


def loss(prediction: Prediction, label: int) -> float:
    """Cross-entropy of a single prediction, ``-log(max(p[label], 1e-12))``."""
    if not 0 <= label < prediction.posterior.shape[0]:
        raise ValueError(f"label {label} outside the class range")
    return -math.log(max(float(prediction.posterior[label]), LOG_FLOOR))


def mean_cross_entropy(posterior: np.ndarray, y: np.ndarray) -> float:
    picked = posterior[np.arange(y.shape[0]), y]
    return float(-np.mean(np.log(np.maximum(picked, LOG_FLOOR))))


def loss_and_gradients(
    params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its analytic gradients."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if "W1" in params:
        hidden = np.tanh(X @ params["W1"] + params["b1"])
        probs = softmax(hidden @ params["W2"] + params["b2"])
    else:
        hidden = None
        probs = softmax(X @ params["W"] + params["b"])
    value = mean_cross_entropy(probs, y)

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    if hidden is None:
        return value, {"W": X.T @ delta, "b": delta.sum(axis=0)}
    grads = {"W2": hidden.T @ delta, "b2": delta.sum(axis=0)}
    back = (delta @ params["W2"].T) * (1.0 - hidden**2)
    grads["W1"] = X.T @ back
    grads["b1"] = back.sum(axis=0)
    return value, grads


def backward_and_update(
    state: ClassifierState,
    X: np.ndarray,
    y: np.ndarray,
    learning_rate: float | None = None,
) -> tuple[ClassifierState, float]:
    """One momentum-SGD step on the batch; updates ``state`` in place.

    ``v <- mu * v + g`` then ``w <- w - lr * v``.
    """
    if len(y) == 0:
        raise ValueError("empty batch")
    value, grads = loss_and_gradients(state.params, X, y)
    if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise DivergenceError("non-finite loss or gradient")
    lr = state.hyperparams.learning_rate if learning_rate is None else learning_rate
    mu = state.hyperparams.momentum
    for name, g in grads.items():
        v = state.momentum_buffers[name]
        v *= mu
        v += g
        state.params[name] -= lr * v
    return state, value


def iter_batches(order: EpochOrder | np.ndarray, batch_size: int, keep_last: bool = True) -> Iterable[np.ndarray]:
    idx = order.indices if isinstance(order, EpochOrder) else np.asarray(order)
    stop = len(idx) if keep_last else len(idx) - len(idx) % batch_size
    for start in range(0, stop, batch_size):
        yield idx[start : start + batch_size]


OrderSource = Callable[[int], EpochOrder]


def train(
    state: ClassifierState,
    train_X: np.ndarray,
    train_y: np.ndarray,
    val_X: np.ndarray,
    val_y: np.ndarray,
    next_order: OrderSource,
    probe: Callable[[], tuple[float, float]] | None = None,
) -> TrainResult:
    """Train with per-epoch orders from ``next_order(epoch)``.

    The returned state carries the weights with minimum validation loss.
    ``probe`` (optional) reports scheduler health after each epoch as
    ``(|sum p - 1|, max |p_i - 1/N|)``.
    """
    hp = state.hyperparams
    n_classes = state.n_classes
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if train_X.shape[0] != train_y.shape[0] or val_X.shape[0] != val_y.shape[0]:
        raise ValueError("features and labels disagree in length")
    if len(val_y) == 0:
        raise ValueError("validation split is empty; early stopping needs it")

    result = TrainResult(state)
    best_loss = math.inf
    for epoch in range(hp.max_epochs):
        lr = hp.lr_at(epoch)
        order = next_order(epoch)
        if len(order) != train_y.shape[0]:
            raise ValueError("epoch order length does not match the training set")
        total, seen = 0.0, 0
        for batch in iter_batches(order, hp.batch_size, hp.keep_last_batch):
            _, batch_loss = backward_and_update(state, train_X[batch], train_y[batch], lr)
            total += batch_loss * len(batch)
            seen += len(batch)
        val_post = predict_proba(state.params, val_X)
        val_loss = mean_cross_entropy(val_post, val_y)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"validation loss is not finite at epoch {epoch}")
        record = EpochRecord(
            epoch=epoch,
            learning_rate=lr,
            train_loss=total / max(seen, 1),
            val_loss=val_loss,
            val_f1=weighted_f1(val_y, val_post.argmax(axis=1), n_classes),
        )
        if probe is not None:
            record.prob_sum_error, record.max_prob_deviation = probe()
        result.trajectory.append(record)
        if val_loss < best_loss:
            best_loss = val_loss
            state.best_snapshot = Snapshot(epoch, val_loss, _copy(state.params))
            result.best_epoch = epoch
        elif epoch - result.best_epoch >= hp.patience:
            result.stopped_early = True
            break

    state.params = _copy(state.best_snapshot.params)
    return result


def save_checkpoint(state: ClassifierState, path) -> None:
    """Write weights and hyperparameters to a versioned ``.npz`` file."""
    arrays = {f"param_{k}": v for k, v in state.params.items()}
    arrays.update({f"velocity_{k}": v for k, v in state.momentum_buffers.items()})
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hyperparams": state.hyperparams.to_dict(),
        "best_epoch": state.best_snapshot.epoch if state.best_snapshot else None,
        "best_validation_loss": (
            state.best_snapshot.validation_loss if state.best_snapshot else None
        ),
    }
    np.savez(path, _meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> ClassifierState:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["_meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError("not a supported classifier checkpoint")
        params = {k[6:]: data[k].copy() for k in data.files if k.startswith("param_")}
        velocity = {k[9:]: data[k].copy() for k in data.files if k.startswith("velocity_")}
    state = ClassifierState(params, velocity, Hyperparams.from_dict(meta["hyperparams"]))
    if meta["best_epoch"] is not None:
        state.best_snapshot = Snapshot(meta["best_epoch"], meta["best_validation_loss"], _copy(params))
    return state
