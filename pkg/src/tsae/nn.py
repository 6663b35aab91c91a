"""Small dense feed-forward networks with sigmoid units, trained by backprop + Adam.

Everything here is plain numpy in float64. Networks are deterministic given a
seed, and weights are stored as ``(fan_out, fan_in)`` matrices so a layer
computes ``sigmoid(a @ W.T + b)`` on a row-major batch ``a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Sequence

import numpy as np

ACTIVATION = "sigmoid"


class NonFiniteError(FloatingPointError):
    """Raised when a parameter, gradient or loss becomes NaN/Inf."""


@dataclass
class DenseNet:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = ACTIVATION

    def __post_init__(self):
        if len(self.layer_dims) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("weights/biases do not match layer_dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != shape:
                raise ValueError(f"weight {i} has shape {w.shape}, expected {shape}")
            if b.shape != (shape[0],):
                raise ValueError(f"bias {i} has shape {b.shape}, expected {(shape[0],)}")
        if self.activation != ACTIVATION:
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.layer_dims[0]

    @property
    def n_out(self) -> int:
        return self.layer_dims[-1]

    def params(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; the arrays are the live parameters."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return forward(self, batch)


def init_dense_net(layer_dims: Sequence[int], seed: int) -> DenseNet:
    """Glorot-uniform weights, zero biases.

    Weights of layer i are drawn from U(-r, r) with r = sqrt(6 / (fan_in + fan_out)),
    layer by layer from a single ``numpy.random.default_rng(seed)`` stream.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("layer_dims must have at least two entries")
    if any(d < 1 for d in dims):
        raise ValueError(f"all layer dims must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        r = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNet(dims, weights, biases)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # branch form: exp is only ever taken of a non-positive argument
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(net: DenseNet, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ValueError(f"expected input of width {net.n_in}, got shape {np.shape(batch)}")
    return x


def _forward_all(net: DenseNet, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    for w, b in zip(net.weights, net.biases):
        acts.append(sigmoid(acts[-1] @ w.T + b))
    return acts


def forward(net: DenseNet, batch) -> np.ndarray:
    """Map a (B, d_in) batch to (B, d_out). A 1-D input is treated as one row."""
    return _forward_all(net, _as_batch(net, batch))[-1]


def recon_loss(x, y) -> float:
    """Squared L2 distance ||x - y||^2."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    d = x - y
    return float(np.dot(d, d))


def batch_loss(net: DenseNet, batch_in, batch_target) -> float:
    """Mean over rows of the per-row squared L2 reconstruction error."""
    x = _as_batch(net, batch_in)
    out = _forward_all(net, x)[-1]
    t = np.asarray(batch_target, dtype=np.float64).reshape(out.shape)
    d = out - t
    return float(np.einsum("ij,ij->", d, d) / x.shape[0])


def backward(net: DenseNet, batch_in, batch_target) -> tuple[list[np.ndarray], float]:
    """Gradients of ``batch_loss`` w.r.t. every parameter.

    Returns ``(grads, loss)`` with ``grads`` laid out like ``net.params()``.
    """
    x = _as_batch(net, batch_in)
    t = np.asarray(batch_target, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape != (x.shape[0], net.n_out):
        raise ValueError(f"target shape {t.shape} does not match output {(x.shape[0], net.n_out)}")
    acts = _forward_all(net, x)
    n = x.shape[0]
    diff = acts[-1] - t
    loss = float(np.einsum("ij,ij->", diff, diff) / n)

    grads: list[np.ndarray] = [None] * (2 * len(net.weights))  # type: ignore[list-item]
    # dL/dz at the output layer; sigmoid'(z) = a(1-a)
    delta = (2.0 / n) * diff * acts[-1] * (1.0 - acts[-1])
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            a = acts[i]
            delta = (delta @ net.weights[i]) * a * (1.0 - a)
    return grads, loss


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_net(cls, net: DenseNet, lr: float, **kw) -> "AdamState":
        ps = net.params()
        return cls([np.zeros_like(p) for p in ps], [np.zeros_like(p) for p in ps], lr=lr, **kw)


def adam_step(net: DenseNet, state: AdamState, grads: Sequence[np.ndarray]) -> None:
    """One in-place Adam update (with bias correction) of ``net`` and ``state``."""
    params = net.params()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameters")
    for g, p in zip(grads, params):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for g, p, m, v in zip(grads, params, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("parameter became non-finite after update")


def count_params(layer_dims: Sequence[Real]) -> tuple[int, int]:
    """(nodes, edges) of a dense stack.

    nodes counts every non-input unit; edges counts weights only (no biases).
    Dims may be non-integral (e.g. ``Fraction(1220, 8)``) when a layer size is
    given as a ratio of the input width; the totals are then floored.
    """
    dims = [Fraction(d) for d in layer_dims]
    nodes = sum(dims[1:], Fraction(0))
    edges = sum((a * b for a, b in zip(dims[:-1], dims[1:])), Fraction(0))
    return math.floor(nodes), math.floor(edges)


def ratio_dims(n_in: int, n_mid: int, integral: bool = True) -> list:
    """Symmetric halving stack: n_in -> n_in/2 -> ... -> n_in/2**k -> ... -> n_in.

    ``n_mid`` is the number of intermediate layers and must be odd. With
    ``integral`` the hidden sizes are floored, otherwise exact fractions.
    """
    if n_mid < 1 or n_mid % 2 == 0:
        raise ValueError("n_mid must be a positive odd number")
    depth = (n_mid + 1) // 2
    enc = [Fraction(n_in, 2**k) for k in range(1, depth + 1)]
    if integral:
        enc = [max(1, math.floor(d)) for d in enc]
    return [n_in, *enc, *enc[-2::-1], n_in]


@dataclass
class TrainLog:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def fit(
    net: DenseNet,
    inputs: np.ndarray,
    targets: np.ndarray,
    *,
    epochs: int,
    lr: float,
    batch_size: int,
    seed: int,
    val_inputs: np.ndarray | None = None,
    val_targets: np.ndarray | None = None,
    early_stop: int | None = None,
    log=None,
) -> TrainLog:
    """Mini-batch Adam on the mean squared-L2 reconstruction loss, in place.

    Rows are reshuffled every epoch from ``default_rng(seed)``. ``early_stop``
    (patience in epochs on validation loss) is off when None.
    """
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("no training rows")
    rng = np.random.default_rng(seed)
    state = AdamState.for_net(net, lr)
    hist = TrainLog()
    best, since_best = math.inf, 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            grads, loss = backward(net, inputs[idx], targets[idx])
            adam_step(net, state, grads)
            total += loss * idx.size
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise NonFiniteError(f"training loss became non-finite at epoch {epoch + 1}")
        hist.train_loss.append(epoch_loss)
        if val_inputs is not None and len(val_inputs):
            hist.val_loss.append(batch_loss(net, val_inputs, val_targets))
        if log is not None:
            log(epoch + 1, hist)
        if early_stop and hist.val_loss:
            if hist.val_loss[-1] < best:
                best, since_best = hist.val_loss[-1], 0
            else:
                since_best += 1
                if since_best >= early_stop:
                    break
    return hist


def net_to_arrays(net: DenseNet, prefix: str) -> dict[str, np.ndarray]:
    out = {f"{prefix}.layer_dims": np.asarray(net.layer_dims, dtype=np.int64)}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}.W{i}"] = w
        out[f"{prefix}.b{i}"] = b
    return out


def net_from_arrays(arrays, prefix: str, activation: str = ACTIVATION) -> DenseNet:
    dims = [int(d) for d in arrays[f"{prefix}.layer_dims"]]
    n = len(dims) - 1
    weights = [np.array(arrays[f"{prefix}.W{i}"], dtype=np.float64) for i in range(n)]
    biases = [np.array(arrays[f"{prefix}.b{i}"], dtype=np.float64) for i in range(n)]
    return DenseNet(dims, weights, biases, activation)
