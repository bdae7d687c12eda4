"""Prediction models mapping feature matrices to parameter vectors.

The main model is a small fully-connected ReLU network with explicit
backpropagation and an Adam optimizer, applied row-wise: feature row j
predicts parameter j through one shared network.  Ridge regression and
k-nearest-neighbors over the same (row, target) pairs serve as baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyTrainSet, SingularSystem, StaleTape

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Mlp:
    """Fully connected network: ReLU hidden layers, identity output."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]


def init_mlp(layer_sizes, seed: int = 0) -> Mlp:
    """Glorot-uniform weights; final layer size must be 1."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or sizes[-1] != 1:
        raise ValueError("layer_sizes must end in a single output unit")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return Mlp(sizes, weights, biases)


@dataclass
class GradientTape:
    """Activations cached by one forward pass; consumed by one backward."""

    inputs: np.ndarray
    pre_acts: list[np.ndarray]
    acts: list[np.ndarray]
    used: bool = False


def forward(mlp: Mlp, features: np.ndarray) -> tuple[np.ndarray, GradientTape]:
    """Apply the network to each feature row; returns (theta_hat, tape)."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[1] != mlp.n_inputs:
        raise DimensionMismatch(f"feature rows have {X.shape[1]} columns, network expects {mlp.n_inputs}")
    a = X
    pre_acts, acts = [], [a]
    last = len(mlp.weights) - 1
    for i, (W, bias) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ W.T + bias
        pre_acts.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    theta_hat = a[:, 0]
    return theta_hat, GradientTape(inputs=X, pre_acts=pre_acts, acts=acts)


def backward(mlp: Mlp, tape: GradientTape, upstream: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backpropagate d(loss)/d(theta_hat) to per-layer (dW, db) gradients."""
    if tape.used:
        raise StaleTape("gradient tape already consumed")
    tape.used = True
    u = np.asarray(upstream, dtype=float).reshape(-1)
    if u.shape[0] != tape.inputs.shape[0]:
        raise DimensionMismatch("upstream length does not match the number of predicted parameters")
    delta = u[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(mlp.weights)
    for i in range(len(mlp.weights) - 1, -1, -1):
        grads[i] = (delta.T @ tape.acts[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ mlp.weights[i]) * (tape.pre_acts[i - 1] > 0)
    return grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_adam(mlp: Mlp, lr: float = 1e-3) -> AdamState:
    shapes = [(W, bias) for W, bias in zip(mlp.weights, mlp.biases)]
    return AdamState(
        lr=lr,
        m=[(np.zeros_like(W), np.zeros_like(b)) for W, b in shapes],
        v=[(np.zeros_like(W), np.zeros_like(b)) for W, b in shapes],
    )


def adam_step(mlp: Mlp, state: AdamState, grads) -> None:
    """One Adam update with bias correction; mutates mlp and state in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for i, (gw, gb) in enumerate(grads):
        mw, mb = state.m[i]
        vw, vb = state.v[i]
        mw[:] = state.beta1 * mw + (1 - state.beta1) * gw
        mb[:] = state.beta1 * mb + (1 - state.beta1) * gb
        vw[:] = state.beta2 * vw + (1 - state.beta2) * gw**2
        vb[:] = state.beta2 * vb + (1 - state.beta2) * gb**2
        mlp.weights[i] -= state.lr * (mw / c1) / (np.sqrt(vw / c2) + state.eps)
        mlp.biases[i] -= state.lr * (mb / c1) / (np.sqrt(vb / c2) + state.eps)


def train_mse(mlp: Mlp, instances, epochs: int, lr: float, seed: int = 0) -> Mlp:
    """Classic supervised training on squared parameter error (the NN baseline)."""
    state = init_adam(mlp, lr=lr)
    rng = np.random.default_rng(seed)
    order = np.arange(len(instances))
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            features, theta = instances[i]
            theta_hat, tape = forward(mlp, features)
            upstream = 2.0 * (theta_hat - theta) / theta.shape[0]
            adam_step(mlp, state, backward(mlp, tape, upstream))
    return mlp


def ridge_fit(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Normal-equation ridge weights: argmin |Xw - y|^2 + lam |w|^2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X and y row counts differ")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    gram = X.T @ X + lam * np.eye(X.shape[1])
    try:
        return np.linalg.solve(gram, X.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"normal equations singular (lam={lam}): {exc}") from exc


def ridge_predict(weights: np.ndarray, x: np.ndarray) -> float:
    return float(np.asarray(x, dtype=float) @ weights)


def knn_predict(train_rows, k: int, query: np.ndarray) -> float:
    """Mean target of the k nearest rows; distance ties keep the lower row index."""
    if not len(train_rows):
        raise EmptyTrainSet("no training rows")
    k = min(int(k), len(train_rows))
    q = np.asarray(query, dtype=float)
    feats = np.array([np.asarray(r[0], dtype=float) for r in train_rows])
    targets = np.array([float(r[1]) for r in train_rows])
    dist = np.linalg.norm(feats - q, axis=1)
    idx = np.argsort(dist, kind="stable")[:k]
    return float(np.mean(targets[idx]))


class MlpModel:
    """Adapter giving a trained network the common predict interface."""

    def __init__(self, mlp: Mlp):
        self.mlp = mlp

    def predict(self, features: np.ndarray) -> np.ndarray:
        theta_hat, _ = forward(self.mlp, features)
        return theta_hat


class RidgeModel:
    def __init__(self, lam: float = 1.0):
        self.lam = lam
        self.weights: np.ndarray | None = None

    def fit(self, instances) -> "RidgeModel":
        X = np.vstack([feat for feat, _ in instances])
        y = np.concatenate([theta for _, theta in instances])
        self.weights = ridge_fit(X, y, self.lam)
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.atleast_2d(features) @ self.weights


class KnnModel:
    def __init__(self, k: int = 5):
        self.k = k
        self.rows: list = []

    def fit(self, instances) -> "KnnModel":
        self.rows = [(feat[j], theta[j]) for feat, theta in instances for j in range(len(theta))]
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        F = np.atleast_2d(features)
        return np.array([knn_predict(self.rows, self.k, F[j]) for j in range(F.shape[0])])
