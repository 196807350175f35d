"""Dense feedforward classifiers trained from scratch with numpy.

ReLU hidden layers, softmax output, categorical cross-entropy, mini-batch
SGD with momentum. Two fixed architectures are derived from the matrix side:
the 100-way subtype classifier and the 2-way valid/invalid discriminator.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CorruptCheckpoint,
    EmptyDataset,
    NonFiniteParameters,
    ShapeMismatch,
    VersionMismatch,
)

__all__ = [
    "MlpModel",
    "TrainConfig",
    "TrainHistory",
    "ann1_layer_sizes",
    "ann2_layer_sizes",
    "build_ann1",
    "build_ann2",
    "forward",
    "forward_batch",
    "cross_entropy",
    "train",
    "gradient_check",
    "save_model",
    "load_model",
]

GROUP_COUNT = 100


@dataclass(eq=False)
class MlpModel:
    """Layer sizes plus per-layer weight matrices (out x in) and bias vectors."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "softmax"

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ShapeMismatch(f"layer_sizes must be >= 2 positive entries, got {sizes}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeMismatch("one weight matrix and bias vector per layer transition")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[k + 1], sizes[k]) or b.shape != (sizes[k + 1],):
                raise ShapeMismatch(
                    f"layer {k}: weight shape {w.shape}, bias shape {b.shape} "
                    f"do not match sizes {sizes[k]} -> {sizes[k + 1]}"
                )
        self.layer_sizes = sizes

    @classmethod
    def initialize(cls, layer_sizes: list[int], seed: int = 0) -> "MlpModel":
        """He-style init: N(0, 2/fan_in) weights, zero biases, seeded PCG64."""
        rng = np.random.Generator(np.random.PCG64(seed))
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_sizes), weights, biases)

    @classmethod
    def zeros(cls, layer_sizes: list[int]) -> "MlpModel":
        weights = [np.zeros((o, i)) for i, o in zip(layer_sizes, layer_sizes[1:])]
        biases = [np.zeros(o) for o in layer_sizes[1:]]
        return cls(list(layer_sizes), weights, biases)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def equals(self, other: "MlpModel") -> bool:
        """Bitwise parameter equality."""
        return (
            self.layer_sizes == other.layer_sizes
            and self.hidden_activation == other.hidden_activation
            and self.output_activation == other.output_activation
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


def ann1_layer_sizes(side: int) -> list[int]:
    """Subtype classifier: input side^2, two halving hidden layers, 100 outputs."""
    if side < 2:
        raise ShapeMismatch(f"matrix side must be >= 2, got {side}")
    d = side * side
    h1 = (d + GROUP_COUNT + 1) // 2
    h2 = (h1 + GROUP_COUNT + 1) // 2
    return [d, h1, h2, GROUP_COUNT]


def ann2_layer_sizes(side: int) -> list[int]:
    """Discriminator: input side^2, one hidden layer, 2 outputs."""
    if side < 2:
        raise ShapeMismatch(f"matrix side must be >= 2, got {side}")
    d = side * side
    return [d, (d + 2 + 1) // 2, 2]


def build_ann1(side: int, seed: int = 0) -> MlpModel:
    return MlpModel.initialize(ann1_layer_sizes(side), seed=seed)


def build_ann2(side: int, seed: int = 0) -> MlpModel:
    return MlpModel.initialize(ann2_layer_sizes(side), seed=seed)


def _forward_states(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Activations a_0..a_L and pre-activations z_1..z_L; a_L holds raw logits."""
    acts = [x]
    pres = []
    last = len(model.weights) - 1
    a = x
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pres.append(z)
        a = np.maximum(z, 0.0) if k < last else z
        acts.append(a)
    return acts, pres


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_inputs(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_size:
        raise ShapeMismatch(f"expected inputs of width {model.input_size}, got shape {x.shape}")
    return x


def forward_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """(n, d_in) inputs -> (n, d_out) softmax probabilities."""
    x = _check_inputs(model, x)
    acts, _ = _forward_states(model, x)
    return _softmax(acts[-1])


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Single input vector -> probability vector (max-subtracted softmax)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_size:
        raise ShapeMismatch(f"expected an input of length {model.input_size}, got shape {x.shape}")
    return forward_batch(model, x[None, :])[0]


def _check_labels(model: MlpModel, x: np.ndarray, y) -> tuple[np.ndarray, np.ndarray]:
    x = _check_inputs(model, x)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"{x.shape[0]} inputs but {y.shape[0]} labels")
    if y.size and (y.min() < 0 or y.max() >= model.output_size):
        raise ShapeMismatch(f"labels must lie in 0..{model.output_size - 1}")
    return x, y


def cross_entropy(model: MlpModel, x: np.ndarray, y) -> float:
    """Mean categorical cross-entropy, computed from logits for stability."""
    x, y = _check_labels(model, x, y)
    if x.shape[0] == 0:
        raise EmptyDataset("cross entropy over zero samples")
    acts, _ = _forward_states(model, x)
    logits = acts[-1]
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(x.shape[0]), y]))


def _gradients(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch plus gradients for every W and b."""
    acts, pres = _forward_states(model, x)
    logits = acts[-1]
    n = x.shape[0]
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = m[:, 0] + np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(n), y]))
    delta = np.exp(shifted)
    delta /= delta.sum(axis=1, keepdims=True)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w = [np.empty(0)] * len(model.weights)
    grads_b = [np.empty(0)] * len(model.biases)
    for k in reversed(range(len(model.weights))):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k]) * (pres[k - 1] > 0.0)
    return loss, grads_w, grads_b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    validation_fraction: float = 0.1
    momentum: float = 0.9

    def __post_init__(self):
        if not (self.learning_rate > 0):
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (0.0 <= self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must lie in [0, 1)")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def train(model: MlpModel, inputs: np.ndarray, labels, cfg: TrainConfig) -> tuple[MlpModel, TrainHistory]:
    """Train a copy of the model; the input model is left untouched.

    The seeded PCG64 stream drives one permutation for the train/validation
    split and one shuffle per epoch, so equal (model, data, cfg) runs are
    bit-identical. With epochs=0 the returned model equals its initialization.
    """
    x, y = _check_labels(model, inputs, labels)
    n = x.shape[0]
    if n == 0:
        raise EmptyDataset("training set is empty")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    perm = rng.permutation(n)
    n_val = int(n * cfg.validation_fraction)
    train_idx = perm[: n - n_val]
    val_idx = perm[n - n_val:]
    if train_idx.size == 0:
        raise EmptyDataset("validation split leaves no training samples")

    out = model.copy()
    vel_w = [np.zeros_like(w) for w in out.weights]
    vel_b = [np.zeros_like(b) for b in out.biases]
    history = TrainHistory()
    for _ in range(cfg.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        total = 0.0
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start: start + cfg.batch_size]
            loss, gw, gb = _gradients(out, x[idx], y[idx])
            total += loss * idx.size
            for k in range(len(out.weights)):
                vel_w[k] = cfg.momentum * vel_w[k] - cfg.learning_rate * gw[k]
                vel_b[k] = cfg.momentum * vel_b[k] - cfg.learning_rate * gb[k]
                out.weights[k] += vel_w[k]
                out.biases[k] += vel_b[k]
                if not (np.isfinite(out.weights[k]).all() and np.isfinite(out.biases[k]).all()):
                    raise NonFiniteParameters(f"layer {k} parameters became non-finite")
        history.train_loss.append(total / order.size)
        if val_idx.size:
            history.val_loss.append(cross_entropy(out, x[val_idx], y[val_idx]))
    return out, history


def gradient_check(model: MlpModel, x: np.ndarray, y: int, step: float = 1e-5) -> float:
    """Compare backprop gradients against central finite differences.

    Returns the largest parameter-wise deviation scaled by the largest
    analytic gradient magnitude (floored at 1e-8), i.e. a relative error
    against the gradient's own scale. Intended for small models only.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    xs, ys = _check_labels(model, x, [y])
    if model.parameter_count() > 10_000:
        raise ShapeMismatch("gradient_check is for small models (<= 10k parameters)")
    _, gw, gb = _gradients(model, xs, ys)
    scale = max(
        max((np.abs(g).max() for g in gw), default=0.0),
        max((np.abs(g).max() for g in gb), default=0.0),
        1e-8,
    )
    work = model.copy()
    worst = 0.0
    for params, grads in ((work.weights, gw), (work.biases, gb)):
        for arr, grad in zip(params, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = cross_entropy(work, xs, ys)
                flat[i] = orig - step
                down = cross_entropy(work, xs, ys)
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                worst = max(worst, abs(numeric - gflat[i]) / scale)
    return worst


# Checkpoint format (all little-endian):
#   magic "MLPC" | u16 version | u8 hidden act | u8 output act |
#   u32 layer count L | L x u32 sizes | per transition: W row-major f64, then b f64
_MAGIC = b"MLPC"
_VERSION = 1
_ACT_CODES = {"relu": 0, "softmax": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def save_model(model: MlpModel, path: str | Path) -> None:
    parts = [
        _MAGIC,
        struct.pack(
            "<HBB",
            _VERSION,
            _ACT_CODES[model.hidden_activation],
            _ACT_CODES[model.output_activation],
        ),
        struct.pack("<I", len(model.layer_sizes)),
        struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes),
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> MlpModel:
    data = Path(path).read_bytes()
    view = memoryview(data)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(data):
            raise CorruptCheckpoint(f"checkpoint truncated at byte {offset}")
        chunk = view[offset: offset + n]
        offset += n
        return chunk

    if bytes(take(4)) != _MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    version, hidden_code, output_code = struct.unpack("<HBB", take(4))
    if version != _VERSION:
        raise VersionMismatch(f"checkpoint version {version}, supported {_VERSION}")
    if hidden_code not in _ACT_NAMES or output_code not in _ACT_NAMES:
        raise CorruptCheckpoint("unknown activation code")
    (count,) = struct.unpack("<I", take(4))
    if count < 2:
        raise CorruptCheckpoint(f"layer count {count} below minimum")
    sizes = list(struct.unpack(f"<{count}I", take(4 * count)))
    if any(s < 1 for s in sizes):
        raise CorruptCheckpoint("zero-sized layer in checkpoint")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        w = np.frombuffer(take(8 * fan_in * fan_out), dtype="<f8").reshape(fan_out, fan_in)
        b = np.frombuffer(take(8 * fan_out), dtype="<f8")
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(data):
        raise CorruptCheckpoint(f"{len(data) - offset} trailing bytes after parameters")
    return MlpModel(sizes, weights, biases, _ACT_NAMES[hidden_code], _ACT_NAMES[output_code])
