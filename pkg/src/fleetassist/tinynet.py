"""Minimal feedforward network engine for scalar scoring models.

A fixed-architecture ReLU MLP (4 -> 32 -> 32 -> 1 by default) with analytic
backpropagation, two loss heads (n-way choice log-likelihood and sigmoid
cross-entropy), and a small Adam/SGD trainer. Everything is double precision
numpy; training is deterministic given the seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

DEFAULT_LAYER_SIZES = (4, 32, 32, 1)


@dataclass(frozen=True)
class MlpParams:
    layer_sizes: tuple
    weights: tuple  # weights[l] has shape (layer_sizes[l], layer_sizes[l+1])
    biases: tuple  # biases[l] has shape (layer_sizes[l+1],)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in (*self.weights, *self.biases)])

    def sq_norm(self) -> float:
        return float(sum(np.sum(w * w) for w in self.weights) + sum(np.sum(b * b) for b in self.biases))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 300
    l2: float = 1e-5
    seed: int = 1
    optimizer: str = "adam"  # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_params(layer_sizes=DEFAULT_LAYER_SIZES, seed: int = 0) -> MlpParams:
    """He fan-in initialization from a seeded generator; zero biases."""
    rng = make_rng(seed, stream=101)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(layer_sizes), tuple(weights), tuple(biases))


def zero_params(layer_sizes=DEFAULT_LAYER_SIZES) -> MlpParams:
    weights = tuple(np.zeros((a, b)) for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))
    biases = tuple(np.zeros(b) for b in layer_sizes[1:])
    return MlpParams(tuple(layer_sizes), weights, biases)


def _forward_cached(params: MlpParams, X: np.ndarray):
    """Returns (outputs (M,), pre-activations per layer, activations per layer)."""
    if X.ndim != 2 or X.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"expected input shape (M, {params.layer_sizes[0]}), got {X.shape}")
    acts = [X]
    pre = []
    a = X
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        pre.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts[-1][:, 0], pre, acts


def forward_batch(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Scalar network output for each row of X."""
    return _forward_cached(params, np.asarray(X, dtype=float))[0]


def forward(params: MlpParams, x) -> float:
    return float(forward_batch(params, np.asarray(x, dtype=float)[None, :])[0])


def _backprop(params: MlpParams, dout: np.ndarray, pre, acts):
    """Gradient of sum_i dout[i] * output_i with respect to all parameters."""
    d = dout[:, None]
    gW = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for l in range(len(params.weights) - 1, -1, -1):
        gW[l] = acts[l].T @ d
        gb[l] = d.sum(axis=0)
        if l > 0:
            d = (d @ params.weights[l].T) * (pre[l - 1] > 0.0)
    return tuple(gW), tuple(gb)


def _add_l2(loss, gW, gb, params, l2):
    if l2 == 0.0:
        return loss, gW, gb
    loss += l2 * params.sq_norm()
    gW = tuple(g + 2.0 * l2 * w for g, w in zip(gW, params.weights))
    gb = tuple(g + 2.0 * l2 * b for g, b in zip(gb, params.biases))
    return loss, gW, gb


def choice_loss_and_grad(params: MlpParams, batch, l2: float = 0.0):
    """Negative log-likelihood of observed choices under the softmax-of-scores
    choice model, plus gradient.

    `batch` is a list of (features, chosen) where features is (n, d): the n
    alternatives' feature rows, and chosen indexes the selected row. All
    alternatives share the network parameters; the log-sum-exp uses
    max-subtraction.
    """
    sizes = []
    for feats, chosen in batch:
        n = feats.shape[0]
        if not (0 <= chosen < n):
            raise ValueError(f"chosen index {chosen} out of range for {n} alternatives")
        sizes.append(n)
    X = np.vstack([feats for feats, _ in batch]).astype(float)
    z, pre, acts = _forward_cached(params, X)

    if len(set(sizes)) == 1:
        # all records share an alternative count: one vectorized log-sum-exp
        n = sizes[0]
        Z = z.reshape(len(batch), n)
        m = Z.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.sum(np.exp(Z - m), axis=1))
        chosen_idx = np.fromiter((c for _, c in batch), dtype=int, count=len(batch))
        rows = np.arange(len(batch))
        loss = float(np.sum(lse - Z[rows, chosen_idx]))
        P = np.exp(Z - lse[:, None])
        P[rows, chosen_idx] -= 1.0
        dout = P.reshape(-1)
    else:
        loss = 0.0
        dout = np.empty_like(z)
        offset = 0
        for (feats, chosen), n in zip(batch, sizes):
            zi = z[offset : offset + n]
            m = zi.max()
            lse = m + np.log(np.sum(np.exp(zi - m)))
            loss += lse - zi[chosen]
            p = np.exp(zi - lse)
            dout[offset : offset + n] = p
            dout[offset + chosen] -= 1.0
            offset += n

    gW, gb = _backprop(params, dout, pre, acts)
    return _add_l2(loss, gW, gb, params, l2)


def binary_loss_and_grad(params: MlpParams, X: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Sigmoid cross-entropy of labels y in {0,1} against the scalar outputs."""
    z, pre, acts = _forward_cached(params, np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    # log(1 + e^z) computed stably
    loss = float(np.sum(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    dout = 1.0 / (1.0 + np.exp(-z)) - y
    gW, gb = _backprop(params, dout, pre, acts)
    return _add_l2(loss, gW, gb, params, l2)


class _Adam:
    def __init__(self, params: MlpParams, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.mW = [np.zeros_like(w) for w in params.weights]
        self.vW = [np.zeros_like(w) for w in params.weights]
        self.mb = [np.zeros_like(b) for b in params.biases]
        self.vb = [np.zeros_like(b) for b in params.biases]

    def update(self, params: MlpParams, gW, gb) -> MlpParams:
        cfg = self.cfg
        self.t += 1
        b1c = 1.0 - cfg.beta1**self.t
        b2c = 1.0 - cfg.beta2**self.t
        new_w, new_b = [], []
        for i, (w, g) in enumerate(zip(params.weights, gW)):
            self.mW[i] = cfg.beta1 * self.mW[i] + (1 - cfg.beta1) * g
            self.vW[i] = cfg.beta2 * self.vW[i] + (1 - cfg.beta2) * g * g
            new_w.append(w - cfg.learning_rate * (self.mW[i] / b1c) / (np.sqrt(self.vW[i] / b2c) + cfg.eps))
        for i, (b, g) in enumerate(zip(params.biases, gb)):
            self.mb[i] = cfg.beta1 * self.mb[i] + (1 - cfg.beta1) * g
            self.vb[i] = cfg.beta2 * self.vb[i] + (1 - cfg.beta2) * g * g
            new_b.append(b - cfg.learning_rate * (self.mb[i] / b1c) / (np.sqrt(self.vb[i] / b2c) + cfg.eps))
        return MlpParams(params.layer_sizes, tuple(new_w), tuple(new_b))


def _sgd_update(params: MlpParams, gW, gb, lr: float) -> MlpParams:
    return MlpParams(
        params.layer_sizes,
        tuple(w - lr * g for w, g in zip(params.weights, gW)),
        tuple(b - lr * g for b, g in zip(params.biases, gb)),
    )


def train(items, loss_grad, cfg: TrainConfig, layer_sizes=DEFAULT_LAYER_SIZES):
    """Mini-batch first-order optimization.

    `items` is a sequence of training examples; `loss_grad(params, batch)`
    returns (loss, gW, gb) for a list of them. Batches are taken in dataset
    order each epoch (no shuffling), so runs are reproducible and duplicating
    the dataset is equivalent to doubling the epochs when batch boundaries
    align. Returns (params, per-epoch mean losses).
    """
    if not items:
        raise ValueError("training set is empty")
    params = init_params(layer_sizes, seed=cfg.seed)
    adam = _Adam(params, cfg) if cfg.optimizer == "adam" else None
    losses = []
    n = len(items)
    for _ in range(cfg.epochs):
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = items[start : start + cfg.batch_size]
            loss, gW, gb = loss_grad(params, batch)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    "loss became non-finite during training; try a lower learning rate"
                )
            total += loss
            if adam is not None:
                params = adam.update(params, gW, gb)
            else:
                params = _sgd_update(params, gW, gb, cfg.learning_rate)
        losses.append(total / n)
    return params, losses


def train_choice_scorer(records, cfg: TrainConfig, layer_sizes=DEFAULT_LAYER_SIZES):
    """Fit the choice model by maximum likelihood over (features, chosen) records."""

    def loss_grad(params, batch):
        return choice_loss_and_grad(params, batch, l2=cfg.l2)

    return train(list(records), loss_grad, cfg, layer_sizes)


def train_binary_scorer(examples, cfg: TrainConfig, layer_sizes=DEFAULT_LAYER_SIZES, batch_rows=None):
    """Fit a sigmoid classifier over (feature row, 0/1 label) examples.

    batch_rows overrides the rows per update (callers equalize records per
    update when each choice record expands to several labeled rows).
    """
    examples = list(examples)
    if not examples:
        raise ValueError("training set is empty")
    X = np.vstack([x for x, _ in examples]).astype(float)
    y = np.array([lab for _, lab in examples], dtype=float)
    rows = batch_rows or cfg.batch_size
    params = init_params(layer_sizes, seed=cfg.seed)
    adam = _Adam(params, cfg) if cfg.optimizer == "adam" else None
    losses = []
    m = X.shape[0]
    for _ in range(cfg.epochs):
        total = 0.0
        for start in range(0, m, rows):
            loss, gW, gb = binary_loss_and_grad(params, X[start : start + rows], y[start : start + rows], l2=cfg.l2)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    "loss became non-finite during training; try a lower learning rate"
                )
            total += loss
            if adam is not None:
                params = adam.update(params, gW, gb)
            else:
                params = _sgd_update(params, gW, gb, cfg.learning_rate)
        losses.append(total / m)
    return params, losses


# ---------------------------------------------------------------------------
# Feature normalization: a fixed affine map (not data-dependent) shared by
# training and serving.


@dataclass(frozen=True)
class Normalizer:
    offset: tuple
    scale: tuple

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - np.array(self.offset)) / np.array(self.scale)

    @staticmethod
    def identity(dim: int) -> "Normalizer":
        return Normalizer((0.0,) * dim, (1.0,) * dim)


def env_normalizer(config) -> Normalizer:
    """Map (x, y, heading, health) to roughly [-1, 1] from arena geometry."""
    xmin, ymin, xmax, ymax = config.arena
    return Normalizer(
        offset=((xmin + xmax) / 2.0, (ymin + ymax) / 2.0, np.pi, 50.0),
        scale=((xmax - xmin) / 2.0, (ymax - ymin) / 2.0, np.pi, 50.0),
    )


MODEL_FORMAT_VERSION = 1


def save_model(params: MlpParams, normalizer: Normalizer, path) -> None:
    obj = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "normalizer": {"offset": list(normalizer.offset), "scale": list(normalizer.scale)},
    }
    with open(path, "w") as f:
        json.dump(obj, f)


def load_model(path):
    with open(path) as f:
        obj = json.load(f)
    if obj.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {obj.get('format_version')}")
    params = MlpParams(
        tuple(obj["layer_sizes"]),
        tuple(np.array(w) for w in obj["weights"]),
        tuple(np.array(b) for b in obj["biases"]),
    )
    norm = Normalizer(tuple(obj["normalizer"]["offset"]), tuple(obj["normalizer"]["scale"]))
    return params, norm
