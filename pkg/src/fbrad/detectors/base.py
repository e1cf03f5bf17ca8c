"""Detector specs, training loop and scoring entry points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import WindowSet
from ..errors import NumericalError, ValidationError
from .dense import DenseAutoencoder, default_hidden
from .lstm import LSTMForecaster
from .pca import LinearPCA

LAYOUT_VERSION = 1
KINDS = ("dense_autoencoder", "linear_pca", "lstm_forecaster")
MIN_WINDOWS = 8

# allowed hyperparameters per kind; None means "derived from the input shape"
_HYPER = {
    "dense_autoencoder": {"hidden": None, "activation": "tanh"},
    "linear_pca": {"components": None},
    "lstm_forecaster": {"hidden": 32},
}


@dataclass(frozen=True)
class DetectorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _HYPER:
            raise ValidationError(f"unknown detector kind {self.kind!r}; expected one of {KINDS}")
        hp = dict(self.hyperparameters)
        unknown = set(hp) - set(_HYPER[self.kind])
        if unknown:
            raise ValidationError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")
        if self.kind == "dense_autoencoder":
            if hp.get("hidden") is not None:
                hidden = [int(h) for h in hp["hidden"]]
                if not hidden or min(hidden) < 1:
                    raise ValidationError("hidden sizes must be positive")
                hp["hidden"] = hidden
            if hp.get("activation", "tanh") not in ("tanh", "linear"):
                raise ValidationError("activation must be 'tanh' or 'linear'")
        elif self.kind == "linear_pca":
            if hp.get("components") is not None and int(hp["components"]) < 1:
                raise ValidationError("components must be positive")
        elif int(hp.get("hidden", 32)) < 1:
            raise ValidationError("hidden must be positive")
        object.__setattr__(self, "hyperparameters", hp)

    def resolved(self, q: int, window_length: int) -> dict:
        """Hyperparameters with shape-dependent defaults filled in."""
        hp = {k: v for k, v in _HYPER[self.kind].items()}
        hp.update({k: v for k, v in self.hyperparameters.items() if v is not None})
        if self.kind == "dense_autoencoder" and hp["hidden"] is None:
            hp["hidden"] = default_hidden(q * window_length)
        if self.kind == "linear_pca" and hp["components"] is None:
            hp["components"] = math.ceil(q / 2)
        if self.kind == "linear_pca":
            hp["components"] = min(int(hp["components"]), q * window_length)
        return hp


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")


@dataclass(frozen=True)
class TrainedDetector:
    spec: DetectorSpec
    weights: np.ndarray
    input_dim: int
    window_length: int
    hyperparameters: dict
    layout_version: int = LAYOUT_VERSION

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise NumericalError("detector weights are not finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def network(self):
        return build_network(self.spec.kind, self.hyperparameters, self.input_dim, self.window_length)


def build_network(kind: str, hp: dict, q: int, window_length: int):
    if kind == "dense_autoencoder":
        return DenseAutoencoder(q * window_length, list(hp["hidden"]), hp["activation"])
    if kind == "lstm_forecaster":
        return LSTMForecaster(q, int(hp["hidden"]))
    return LinearPCA(q * window_length, int(hp["components"]))


def _as_windows(windows) -> np.ndarray:
    x = windows.windows if isinstance(windows, WindowSet) else np.asarray(windows, dtype=np.float64)
    if x.ndim != 3:
        raise ValidationError(f"windows must be (m, W, q), got shape {x.shape}")
    return x


def _network_input(kind: str, x: np.ndarray) -> np.ndarray:
    return x if kind == "lstm_forecaster" else x.reshape(x.shape[0], -1)


def fit_detector(spec: DetectorSpec, windows, cfg: TrainingConfig,
                 rng: np.random.Generator | None = None) -> TrainedDetector:
    """Train one detector on ``windows`` (shape (m, W, q)).

    Gradient-trained kinds use minibatch Adam with a reshuffle per epoch; the
    PCA kind is solved in closed form. All randomness comes from ``rng``
    (default: a generator seeded with ``cfg.seed``).
    """
    x = _as_windows(windows)
    m, w, q = x.shape
    if m < MIN_WINDOWS:
        raise ValidationError(f"need at least {MIN_WINDOWS} windows, got {m}")
    if spec.kind == "lstm_forecaster" and w < 2:
        raise ValidationError("the LSTM forecaster needs windows of at least 2 steps")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    hp = spec.resolved(q, w)
    net = build_network(spec.kind, hp, q, w)
    data = _network_input(spec.kind, x)

    if spec.kind == "linear_pca":
        params = net.fit(data)
    else:
        params = net.init_params(rng)
        adam_m = np.zeros_like(params)
        adam_v = np.zeros_like(params)
        step = 0
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        for epoch in range(cfg.epochs):
            perm = rng.permutation(m)
            for batch, start in enumerate(range(0, m, cfg.batch_size)):
                loss, grad = net.loss_and_grad(params, data[perm[start:start + cfg.batch_size]])
                if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                    raise NumericalError(f"non-finite loss at epoch {epoch}, batch {batch}")
                step += 1
                adam_m = b1 * adam_m + (1 - b1) * grad
                adam_v = b2 * adam_v + (1 - b2) * grad * grad
                lr = cfg.learning_rate * math.sqrt(1 - b2 ** step) / (1 - b1 ** step)
                params = params - lr * adam_m / (np.sqrt(adam_v) + cfg.adam_eps)
    return TrainedDetector(spec, params, q, w, hp)


def score_windows(model: TrainedDetector, windows) -> np.ndarray:
    """One nonnegative anomaly score per window."""
    x = _as_windows(windows)
    if x.shape[1:] != (model.window_length, model.input_dim):
        raise ValidationError(
            f"windows of shape {x.shape[1:]} do not match model "
            f"({model.window_length}, {model.input_dim})")
    return model.network.score(model.weights, _network_input(model.spec.kind, x))


def loss_and_grad(spec: DetectorSpec, params, windows):
    x = _as_windows(windows)
    _, w, q = x.shape
    net = build_network(spec.kind, spec.resolved(q, w), q, w)
    if not hasattr(net, "loss_and_grad"):
        raise ValidationError(f"{spec.kind} is not gradient-trained")
    return net.loss_and_grad(np.asarray(params, dtype=np.float64), _network_input(spec.kind, x))


def gradient_check(spec: DetectorSpec, windows, params=None, step: float = 1e-5,
                   seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per parameter is ``|g - g_fd| / max(1e-8, |g| + |g_fd|)``.
    """
    x = _as_windows(windows)
    _, w, q = x.shape
    net = build_network(spec.kind, spec.resolved(q, w), q, w)
    if params is None:
        params = net.init_params(np.random.default_rng(seed))
    params = np.array(params, dtype=np.float64)
    loss, grad = loss_and_grad(spec, params, x)
    if not math.isfinite(loss):
        raise NumericalError("non-finite loss at the probe point")
    fd = np.empty_like(params)
    for k in range(params.size):
        orig = params[k]
        params[k] = orig + step
        up = loss_and_grad(spec, params, x)[0]
        params[k] = orig - step
        down = loss_and_grad(spec, params, x)[0]
        params[k] = orig
        fd[k] = (up - down) / (2 * step)
    rel = np.abs(grad - fd) / np.maximum(1e-8, np.abs(grad) + np.abs(fd))
    return float(rel.max())
