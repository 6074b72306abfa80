"""Dense numeric substrate: probability primitives, a small MLP and SGD.

Matrices are plain ``float64`` numpy arrays. Probability helpers accept a
single vector or a stack of row vectors and reduce over the last axis.
"""

import math
from dataclasses import dataclass

import numpy as np

from fedol.errors import (
    NumericInputError,
    PreconditionError,
    ShapeError,
    TrainingDivergedError,
)

EPS = 1e-12
ACTIVATIONS = ("relu", "tanh")


def _as_float(x, name="input"):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericInputError(f"{name} contains non-finite values")
    return arr


def _check_pair(p, q):
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")


def softmax(logits):
    z = _as_float(logits, "logits")
    if z.ndim == 0 or z.shape[-1] == 0:
        raise NumericInputError("softmax needs at least one logit")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = _as_float(logits, "logits")
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _xlogy(x, y):
    # 0 * log(0) := 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0.0, x * np.log(np.where(x > 0.0, y, 1.0)), 0.0)


def entropy(p):
    """Shannon entropy in nats, ``-sum p ln p``."""
    p = np.asarray(p, dtype=np.float64)
    return -_xlogy(p, p).sum(axis=-1)


def cross_entropy(target, pred):
    t = np.asarray(target, dtype=np.float64)
    q = np.asarray(pred, dtype=np.float64)
    _check_pair(t, q)
    return -(t * np.log(np.maximum(q, EPS))).sum(axis=-1)


def kl_divergence(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _check_pair(p, q)
    return (_xlogy(p, p) - p * np.log(np.maximum(q, EPS))).sum(axis=-1)


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise PreconditionError("epochs must be >= 1")
        if self.batch_size < 1:
            raise PreconditionError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise PreconditionError("learning_rate must be non-negative")


@dataclass
class MlpModel:
    """Feed-forward classifier; hidden layers use ``activation``, the last is linear.

    ``weights[i]`` has shape ``(layer_sizes[i], layer_sizes[i + 1])``.
    """

    layer_sizes: list
    weights: list
    biases: list
    activation: str = "relu"

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if len(self.layer_sizes) < 2:
            raise ShapeError("need at least input and output sizes")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("one weight matrix and bias per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise ShapeError(f"layer {i}: expected {shape}, got {w.shape}/{b.shape}")

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    def params(self):
        """Flat list of parameter arrays (w0, b0, w1, b1, ...), shared not copied."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def param_count(self):
        return int(sum(p.size for p in self.params()))

    def copy(self):
        return MlpModel(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def same_architecture(self, other):
        return self.layer_sizes == other.layer_sizes and self.activation == other.activation


def init_mlp(layer_sizes, seed, activation="relu"):
    """Glorot-uniform weights and zero biases drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in layer_sizes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, activation)


def zero_mlp(layer_sizes, activation="relu"):
    sizes = [int(s) for s in layer_sizes]
    return MlpModel(
        sizes,
        [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
        [np.zeros(b) for b in sizes[1:]],
        activation,
    )


def _act(name, z):
    return np.maximum(z, 0.0) if name == "relu" else np.tanh(z)


def _act_grad(name, z, a):
    return (z > 0.0).astype(np.float64) if name == "relu" else 1.0 - a * a


def _forward_cache(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_inputs:
        raise ShapeError(f"batch shape {x.shape} does not match input dim {model.n_inputs}")
    acts, pre = [x], []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else _act(model.activation, z)
        acts.append(h)
    return acts, pre


def forward(model, batch):
    """Logits for every row of ``batch``."""
    return _forward_cache(model, batch)[0][-1]


def predict_proba(model, batch):
    return softmax(forward(model, batch))


def accuracy(model, features, labels):
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(forward(model, features).argmax(axis=1) == np.asarray(labels)))


def backward(model, acts, pre, dlogits):
    """Parameter gradients given d(loss)/d(logits); same order as ``params()``."""
    grads = [None] * (2 * len(model.weights))
    delta = dlogits
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * _act_grad(model.activation, pre[i - 1], acts[i])
    return grads


def soft_ce_loss_and_grad(model, x, targets, row_weights=None):
    """Mean cross-entropy of softmax(forward(x)) against target rows.

    ``row_weights`` (optional) replaces the uniform 1/n averaging.
    """
    acts, pre = _forward_cache(model, x)
    probs = softmax(acts[-1])
    n = x.shape[0]
    w = np.full(n, 1.0 / n) if row_weights is None else np.asarray(row_weights, dtype=np.float64)
    loss = float(np.dot(w, cross_entropy(targets, probs)))
    dlogits = (probs * targets.sum(axis=1, keepdims=True) - targets) * w[:, None]
    return loss, backward(model, acts, pre, dlogits)


def minimize(model, n_rows, cfg, batch_objective, penalty=None, on_epoch=None):
    """Mini-batch SGD over ``n_rows`` samples, updating ``model`` in place.

    ``batch_objective(model, idx)`` returns ``(loss, grads)`` for the rows
    ``idx``. ``penalty(params)`` returns ``(value, grads)`` added to every
    step; a penalty exposing ``prox(params, lr)`` is applied as a proximal
    step after the gradient step instead.
    """
    if n_rows < 1:
        raise PreconditionError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    use_prox = penalty is not None and hasattr(penalty, "prox")
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_rows)
        total = 0.0
        for start in range(0, n_rows, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    loss, grads = batch_objective(model, idx)
            except NumericInputError as exc:
                raise TrainingDivergedError(f"non-finite activations in epoch {epoch}") from exc
            if penalty is not None and not use_prox:
                pval, pgrads = penalty(params)
                loss += pval
                grads = [g + pg for g, pg in zip(grads, pgrads)]
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss} in epoch {epoch}")
            for p, g in zip(params, grads):
                p -= lr * g
            if use_prox:
                penalty.prox(params, lr)
            total += loss * len(idx)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergedError(f"parameters became non-finite in epoch {epoch}")
        if on_epoch is not None:
            on_epoch(epoch, total / n_rows)
    return model


def train_supervised(model, features, labels, cfg, extra_loss=None):
    """Train a copy of ``model`` on (features, target-distribution rows)."""
    x = _as_float(features, "features")
    y = np.asarray(labels, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} feature rows vs {y.shape[0]} label rows")
    if x.shape[0] == 0:
        raise PreconditionError("cannot train on an empty dataset")
    if y.ndim != 2 or y.shape[1] != model.n_classes:
        raise ShapeError(f"labels must be (n, {model.n_classes})")
    trained = model.copy()

    def objective(m, idx):
        return soft_ce_loss_and_grad(m, x[idx], y[idx])

    return minimize(trained, x.shape[0], cfg, objective, penalty=extra_loss)


def average_models(models, weights):
    """Weighted parameter average of same-architecture models.

    Computed as an offset from the first model, so averaging identical
    models returns them bit-for-bit.
    """
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    out = models[0].copy()
    for p_out, *ps in zip(out.params(), *(m.params() for m in models)):
        delta = np.zeros_like(p_out)
        for wi, p in zip(w[1:], ps[1:]):
            delta += wi * (p - ps[0])
        p_out += delta
    return out


@dataclass
class ProximalPenalty:
    """``(mu / 2) * ||w - anchor||^2`` over all parameters."""

    anchor: list
    mu: float

    def __call__(self, params):
        diffs = [p - a for p, a in zip(params, self.anchor)]
        value = 0.5 * self.mu * sum(float((d * d).sum()) for d in diffs)
        return value, [self.mu * d for d in diffs]

    def prox(self, params, lr):
        # closed-form proximal map; stable for any mu * lr
        if self.mu == 0.0:
            return
        shrink = 1.0 / (1.0 + lr * self.mu)
        for p, a in zip(params, self.anchor):
            p[...] = a + (p - a) * shrink
