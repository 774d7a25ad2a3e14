"""Small feed-forward regressor trained from scratch with Adam.

Maps the four pairwise migration features (origin population, destination
population, distance, intervening opportunities) to a nonnegative
destination weight.  Inputs pass through log1p and a training-set
standardization; hidden layers use tanh and the output is exponentiated so
predictions stay positive.  Training is full-batch and fully deterministic
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_FEATURES = 4
_STD_FLOOR = 1e-8  # constant features would otherwise divide by zero

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class NeuralConfig:
    """Training hyperparameters; defaults are the production configuration."""

    hidden: tuple[int, ...] = (64, 64)
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 42


@dataclass
class NeuralWeights:
    """Trained parameter block: layer weights/biases plus the input transform."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feat_mean: np.ndarray
    feat_std: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "feat_mean": self.feat_mean.tolist(),
            "feat_std": self.feat_std.tolist(),
            "layers": [
                {"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "NeuralWeights":
        weights, biases = [], []
        for layer in obj["layers"]:
            shape = tuple(layer["shape"])
            weights.append(np.array(layer["weights"], dtype=float).reshape(shape))
            biases.append(np.array(layer["bias"], dtype=float))
        return cls(weights=weights, biases=biases,
                   feat_mean=np.array(obj["feat_mean"], dtype=float),
                   feat_std=np.array(obj["feat_std"], dtype=float))


def _transform(features: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (np.log1p(features) - mean) / std


def init_weights(features: np.ndarray, hidden: tuple[int, ...], seed: int) -> NeuralWeights:
    """Seeded initialization; standardization constants come from the data."""
    logf = np.log1p(features)
    mean = logf.mean(axis=0)
    std = np.maximum(logf.std(axis=0), _STD_FLOOR)
    rng = np.random.default_rng(seed)
    sizes = [features.shape[1], *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NeuralWeights(weights=weights, biases=biases, feat_mean=mean, feat_std=std)


def forward(nw: NeuralWeights, features: np.ndarray) -> np.ndarray:
    """Nonnegative weight prediction for each feature row."""
    a = _transform(np.asarray(features, dtype=float), nw.feat_mean, nw.feat_std)
    for W, b in zip(nw.weights[:-1], nw.biases[:-1]):
        a = np.tanh(a @ W + b)
    return np.exp(a @ nw.weights[-1] + nw.biases[-1]).ravel()


def loss_and_gradients(nw: NeuralWeights, features: np.ndarray, targets: np.ndarray):
    """Mean-squared-error loss and its gradients w.r.t. every weight and bias."""
    targets = np.asarray(targets, dtype=float)
    x = _transform(np.asarray(features, dtype=float), nw.feat_mean, nw.feat_std)
    activations = [x]
    a = x
    for W, b in zip(nw.weights[:-1], nw.biases[:-1]):
        a = np.tanh(a @ W + b)
        activations.append(a)
    y = np.exp(a @ nw.weights[-1] + nw.biases[-1]).ravel()

    n = len(targets)
    resid = y - targets
    loss = float(np.mean(resid * resid))

    grad_w = [np.empty_like(W) for W in nw.weights]
    grad_b = [np.empty_like(b) for b in nw.biases]
    # d loss / d pre-activation of the exp output
    delta = ((2.0 / n) * resid * y)[:, None]
    grad_w[-1] = activations[-1].T @ delta
    grad_b[-1] = delta.sum(axis=0)
    back = delta @ nw.weights[-1].T
    for layer in range(len(nw.weights) - 2, -1, -1):
        da = back * (1.0 - activations[layer + 1] ** 2)  # tanh'
        grad_w[layer] = activations[layer].T @ da
        grad_b[layer] = da.sum(axis=0)
        if layer:
            back = da @ nw.weights[layer].T
    return loss, grad_w, grad_b


def numerical_gradients(nw: NeuralWeights, features: np.ndarray, targets: np.ndarray,
                        eps: float = 1e-6):
    """Central finite differences of the loss; independent check of the backprop path."""

    def loss_only():
        y = forward(nw, features)
        r = y - np.asarray(targets, dtype=float)
        return float(np.mean(r * r))

    grad_w = [np.zeros_like(W) for W in nw.weights]
    grad_b = [np.zeros_like(b) for b in nw.biases]
    for params, grads in ((nw.weights, grad_w), (nw.biases, grad_b)):
        for p, g in zip(params, grads):
            flat_p = p.ravel()
            flat_g = g.ravel()
            for k in range(flat_p.size):
                orig = flat_p[k]
                flat_p[k] = orig + eps
                up = loss_only()
                flat_p[k] = orig - eps
                down = loss_only()
                flat_p[k] = orig
                flat_g[k] = (up - down) / (2.0 * eps)
    return grad_w, grad_b


def train_mlp(features: np.ndarray, targets: np.ndarray, config: NeuralConfig) -> NeuralWeights:
    """Full-batch Adam descent on the MSE loss; bitwise reproducible per seed."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    nw = init_weights(features, config.hidden, config.seed)
    # start the exp output at the mean target scale instead of exp(0) = 1
    nw.biases[-1][:] = np.log(max(float(targets.mean()), 1e-12))
    params = nw.weights + nw.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    lr = config.learning_rate
    for step in range(1, config.epochs + 1):
        _, grad_w, grad_b = loss_and_gradients(nw, features, targets)
        grads = grad_w + grad_b
        bias1 = 1.0 - ADAM_BETA1 ** step
        bias2 = 1.0 - ADAM_BETA2 ** step
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= ADAM_BETA1
            mi += (1.0 - ADAM_BETA1) * g
            vi *= ADAM_BETA2
            vi += (1.0 - ADAM_BETA2) * g * g
            p -= lr * (mi / bias1) / (np.sqrt(vi / bias2) + ADAM_EPS)
    return nw
