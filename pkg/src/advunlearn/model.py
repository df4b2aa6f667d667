"""Feed-forward softmax classifier with exact gradients.

The parameter vector is enumerated layer by layer: for layer ``k`` the
weight matrix ``W_k`` (shape ``(out, in)``, row-major) comes first, then
its bias ``b_k``. Fisher diagonals and snapshots use the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0.0), lambda a: (a > 0.0).astype(a.dtype)),
}


class ShapeError(ValueError):
    pass


class LabelError(ValueError):
    pass


@dataclass
class Classifier:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeError(f"layer {k}: weight {W.shape} / bias {b.shape} mismatch")
            if k and W.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeError(f"layer {k} input width {W.shape[1]} does not chain")

    @classmethod
    def initialize(cls, input_dim, hidden=(64, 64), class_count=7, activation="tanh", rng=None):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        sizes = [input_dim, *hidden, class_count]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation)

    @classmethod
    def zeros(cls, input_dim, hidden=(), class_count=7, activation="tanh"):
        sizes = [input_dim, *hidden, class_count]
        return cls(
            [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
            [np.zeros(o) for o in sizes[1:]],
            activation,
        )

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def class_count(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [W.shape[0] for W in self.weights]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def get_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for W, b in zip(self.weights, self.biases) for a in (W, b)])

    def set_params(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got shape {flat.shape}")
        pos = 0
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[k] = flat[pos:pos + W.size].reshape(W.shape).copy()
            pos += W.size
            self.biases[k] = flat[pos:pos + b.size].copy()
            pos += b.size

    def copy(self) -> "Classifier":
        return Classifier([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.activation)

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim not in (1, 2) or X.shape[-1] != self.input_dim:
            raise ShapeError(f"input of shape {X.shape} does not match input_dim={self.input_dim}")
        return X

    def _activations(self, X):
        act, _ = _ACTIVATIONS[self.activation]
        acts = [X]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W.T + b
            acts.append(z if k == last else act(z))
        return acts

    def logits(self, X) -> np.ndarray:
        X = self._check_input(X)
        return self._activations(X)[-1]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, X) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. ties go to the lowest class index
        return np.argmax(self.logits(X), axis=-1)

    def _backward(self, X, labels):
        """Per-sample logit deltas and cached activations for a 2-D batch."""
        labels = self._check_labels(labels, X.shape[0])
        acts = self._activations(X)
        delta = softmax(acts[-1])
        delta[np.arange(len(labels)), labels] -= 1.0
        return acts, delta

    def _check_labels(self, labels, n):
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise LabelError(f"labels must lie in [0, {self.class_count})")
        return labels.astype(np.int64)

    def _layer_deltas(self, acts, delta):
        """Backpropagate ``delta`` (per-sample dL/dlogits); yields (k, delta_k) top-down."""
        _, dact = _ACTIVATIONS[self.activation]
        for k in range(len(self.weights) - 1, -1, -1):
            yield k, delta
            if k:
                delta = (delta @ self.weights[k]) * dact(acts[k])

    def grad_params(self, X, labels, sample_weight=None) -> np.ndarray:
        """Gradient of the (weighted) mean cross-entropy w.r.t. the flat parameters."""
        X = np.atleast_2d(self._check_input(X))
        acts, delta = self._backward(X, labels)
        if sample_weight is None:
            delta /= X.shape[0]
        else:
            delta *= np.asarray(sample_weight, dtype=float)[:, None]
        parts = [None] * len(self.weights)
        for k, d in self._layer_deltas(acts, delta):
            parts[k] = (d.T @ acts[k], d.sum(axis=0))
        return np.concatenate([a.ravel() for gW, gb in parts for a in (gW, gb)])

    def squared_grad_mean(self, X, labels) -> np.ndarray:
        """Mean over samples of the squared per-sample parameter gradients."""
        X = np.atleast_2d(self._check_input(X))
        acts, delta = self._backward(X, labels)
        n = X.shape[0]
        parts = [None] * len(self.weights)
        # (d_i a_i^T)^2 summed over i factorizes into (d^2)^T (a^2)
        for k, d in self._layer_deltas(acts, delta):
            d2 = d * d
            parts[k] = (d2.T @ (acts[k] ** 2) / n, d2.sum(axis=0) / n)
        return np.concatenate([a.ravel() for gW, gb in parts for a in (gW, gb)])

    def grad_input(self, X, labels) -> np.ndarray:
        """Per-sample gradient of cross-entropy w.r.t. the input, same shape as X."""
        X = self._check_input(X)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        acts, delta = self._backward(X2, np.atleast_1d(labels))
        for k, d in self._layer_deltas(acts, delta):
            if k == 0:
                g = d @ self.weights[0]
        return g[0] if single else g

    def loss(self, X, labels) -> float:
        """Mean cross-entropy over a batch."""
        X = np.atleast_2d(self._check_input(X))
        labels = self._check_labels(np.atleast_1d(labels), X.shape[0])
        probs = softmax(self.logits(X))
        return float(np.mean(-np.log(np.maximum(probs[np.arange(len(labels)), labels], PROB_FLOOR))))


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: Classifier, x) -> np.ndarray:
    """Class probabilities for one sample (or a batch)."""
    return model.predict_proba(x)


def cross_entropy(probs, label: int) -> float:
    probs = np.asarray(probs, dtype=float)
    if not 0 <= label < probs.shape[-1]:
        raise LabelError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def grad_params(model: Classifier, X, labels) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ShapeError("empty batch")
    return model.grad_params(X, labels)


def grad_input(model: Classifier, x, label: int) -> np.ndarray:
    return model.grad_input(x, label)


@dataclass
class Adam:
    """Adam with bias correction. Keeps its own moment state."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    t: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def step(self, model: Classifier, grad) -> None:
        grad = np.asarray(grad, dtype=float)
        if grad.shape != (model.n_params,):
            raise ShapeError(f"gradient shape {grad.shape} != ({model.n_params},)")
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        model.set_params(model.get_params() - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))


def optimizer_step(model: Classifier, grad, state: Adam) -> Adam:
    state.step(model, grad)
    return state
