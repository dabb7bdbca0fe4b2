"""Dense feed-forward kernel with explicit reverse-mode gradients.

Small enough to audit: rectified-linear hidden layers, linear output,
float64 everywhere.  Inputs follow the (batch, features) convention with
weight matrices stored as (out, in).  ``backward`` returns exact gradients
of the scalar loss implied by the upstream gradient, for the parameters and
for the input (the latter is what lets a policy gradient flow through a
frozen critic).  The Adam optimizer and polyak averaging operate in place on
:class:`NetworkWeights`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .docio import decode_array, encode_array
from .errors import FormatError, NumericError, ShapeError

__all__ = [
    "NetworkWeights",
    "Gradients",
    "AdamState",
    "ScalarAdam",
    "init_network",
    "forward",
    "forward_cached",
    "backward",
    "backward_from_cache",
    "adam_init",
    "adam_step",
    "soft_update",
    "net_to_doc",
    "net_from_doc",
    "adam_to_doc",
    "adam_from_doc",
]


@dataclass
class NetworkWeights:
    """Ordered (out, in) weight matrices and (out,) bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias vector per weight matrix")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(
                    f"layer {i}: weight {w.shape} and bias {b.shape} do not compose")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i} expects {w.shape[1]} inputs, layer {i - 1} "
                    f"emits {self.weights[i - 1].shape[0]}")
        if not all(np.isfinite(w).all() for w in self.weights) or \
                not all(np.isfinite(b).all() for b in self.biases):
            raise NumericError("network parameters must be finite")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "NetworkWeights":
        return NetworkWeights([w.copy() for w in self.weights],
                              [b.copy() for b in self.biases])


@dataclass
class Gradients:
    """Parameter gradients congruent to a :class:`NetworkWeights`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_network(layer_sizes: list[int], rng: np.random.Generator) -> NetworkWeights:
    """Fan-in scaled uniform initialization, seeded by the caller."""
    if len(layer_sizes) < 2:
        raise ShapeError("need at least an input and an output size")
    if any(int(s) < 1 for s in layer_sizes):
        raise ShapeError(f"layer sizes must be positive, got {layer_sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return NetworkWeights(weights, biases)


def _as_batch(x: np.ndarray, in_dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with in_dim {in_dim}")
    return x, single


def forward_cached(net: NetworkWeights, x: np.ndarray):
    """Batched forward pass returning (output, cache) for backprop."""
    x2d, _ = _as_batch(x, net.in_dim)
    activations = [x2d]
    preacts = []
    a = x2d
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        preacts.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        activations.append(a)
    return a, (activations, preacts)


def forward(net: NetworkWeights, x: np.ndarray) -> np.ndarray:
    """Affine + rectified-linear composition; output layer is linear."""
    x2d, single = _as_batch(x, net.in_dim)
    out, _ = forward_cached(net, x2d)
    return out[0] if single else out


def backward_from_cache(net: NetworkWeights, cache, upstream: np.ndarray):
    """Reverse pass from a ``forward_cached`` cache.

    Returns (parameter gradients, input gradient).  ``upstream`` is the
    gradient of the scalar loss with respect to the network output and must
    carry any batch-averaging factor itself.
    """
    activations, preacts = cache
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != activations[-1].shape:
        raise ShapeError(
            f"upstream gradient shape {g.shape} != output shape {activations[-1].shape}")
    grad_w = [None] * net.n_layers
    grad_b = [None] * net.n_layers
    for i in range(net.n_layers - 1, -1, -1):
        grad_w[i] = g.T @ activations[i]
        grad_b[i] = g.sum(axis=0)
        g = g @ net.weights[i]
        if i > 0:
            g = g * (preacts[i - 1] > 0.0)
    return Gradients(grad_w, grad_b), g


def backward(net: NetworkWeights, x: np.ndarray, upstream: np.ndarray):
    """Exact reverse-mode gradients for input ``x`` and the given upstream.

    Accepts a single input vector with a matching 1-D upstream, or a batch
    of each.  Returns (parameter gradients, input gradient) with the input
    gradient shaped like ``x``.
    """
    x2d, single = _as_batch(x, net.in_dim)
    up = np.asarray(upstream, dtype=np.float64)
    if single and up.ndim == 1:
        up = up[None, :]
    _, cache = forward_cached(net, x2d)
    grads, grad_in = backward_from_cache(net, cache, up)
    return grads, (grad_in[0] if single else grad_in)


@dataclass
class AdamState:
    """Bias-corrected adaptive-moment optimizer state for one network."""

    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    def __post_init__(self):
        if self.step < 0:
            raise ShapeError("step counter must be nonnegative")


def adam_init(net: NetworkWeights, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m_weights=[np.zeros_like(w) for w in net.weights],
        m_biases=[np.zeros_like(b) for b in net.biases],
        v_weights=[np.zeros_like(w) for w in net.weights],
        v_biases=[np.zeros_like(b) for b in net.biases],
        step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def _adam_update(param, m, v, grad, lr, beta1, beta2, eps, step):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def adam_step(opt: AdamState, net: NetworkWeights, grads: Gradients) -> NetworkWeights:
    """One in-place Adam update; returns the mutated network."""
    if len(grads.weights) != net.n_layers:
        raise ShapeError("gradient layer count does not match network")
    opt.step += 1
    for w, mw, vw, gw in zip(net.weights, opt.m_weights, opt.v_weights, grads.weights):
        if gw.shape != w.shape:
            raise ShapeError(f"gradient shape {gw.shape} != weight shape {w.shape}")
        _adam_update(w, mw, vw, gw, opt.lr, opt.beta1, opt.beta2, opt.eps, opt.step)
    for b, mb, vb, gb in zip(net.biases, opt.m_biases, opt.v_biases, grads.biases):
        if gb.shape != b.shape:
            raise ShapeError(f"gradient shape {gb.shape} != bias shape {b.shape}")
        _adam_update(b, mb, vb, gb, opt.lr, opt.beta1, opt.beta2, opt.eps, opt.step)
    return net


class ScalarAdam:
    """Adam on a single scalar parameter (used for the entropy temperature)."""

    def __init__(self, value: float, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.value = float(value)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = 0.0
        self.v = 0.0
        self.step = 0

    def update(self, grad: float) -> float:
        self.step += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.step)
        v_hat = self.v / (1.0 - self.beta2 ** self.step)
        self.value -= self.lr * m_hat / (math.sqrt(v_hat) + self.eps)
        return self.value

    def to_doc(self) -> dict:
        return {"value": self.value, "lr": self.lr, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps,
                "m": self.m, "v": self.v, "step": self.step}

    @classmethod
    def from_doc(cls, doc: dict) -> "ScalarAdam":
        out = cls(doc["value"], doc["lr"], doc["beta1"], doc["beta2"], doc["eps"])
        out.m, out.v, out.step = doc["m"], doc["v"], doc["step"]
        return out


def soft_update(target: NetworkWeights, online: NetworkWeights,
                tau_polyak: float) -> NetworkWeights:
    """In-place polyak blend target <- (1 - tau) target + tau online."""
    if not 0.0 <= tau_polyak <= 1.0:
        raise ShapeError(f"tau_polyak must lie in [0, 1], got {tau_polyak}")
    if [w.shape for w in target.weights] != [w.shape for w in online.weights]:
        raise ShapeError("target and online networks are not congruent")
    for tw, ow in zip(target.weights, online.weights):
        tw *= (1.0 - tau_polyak)
        tw += tau_polyak * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= (1.0 - tau_polyak)
        tb += tau_polyak * ob
    return target


_NET_FORMAT = "gasmarket-network"
_ADAM_FORMAT = "gasmarket-adam"


def net_to_doc(net: NetworkWeights) -> dict:
    return {
        "format": _NET_FORMAT,
        "version": 1,
        "weights": [encode_array(w) for w in net.weights],
        "biases": [encode_array(b) for b in net.biases],
    }


def net_from_doc(doc: dict) -> NetworkWeights:
    if doc.get("format") != _NET_FORMAT or doc.get("version") != 1:
        raise FormatError(
            f"expected {_NET_FORMAT} v1, got {doc.get('format')!r} v{doc.get('version')!r}")
    return NetworkWeights([decode_array(w) for w in doc["weights"]],
                          [decode_array(b) for b in doc["biases"]])


def adam_to_doc(opt: AdamState) -> dict:
    return {
        "format": _ADAM_FORMAT,
        "version": 1,
        "m_weights": [encode_array(a) for a in opt.m_weights],
        "m_biases": [encode_array(a) for a in opt.m_biases],
        "v_weights": [encode_array(a) for a in opt.v_weights],
        "v_biases": [encode_array(a) for a in opt.v_biases],
        "step": opt.step, "lr": opt.lr, "beta1": opt.beta1,
        "beta2": opt.beta2, "eps": opt.eps,
    }


def adam_from_doc(doc: dict) -> AdamState:
    if doc.get("format") != _ADAM_FORMAT or doc.get("version") != 1:
        raise FormatError(
            f"expected {_ADAM_FORMAT} v1, got {doc.get('format')!r} v{doc.get('version')!r}")
    return AdamState(
        m_weights=[decode_array(a) for a in doc["m_weights"]],
        m_biases=[decode_array(a) for a in doc["m_biases"]],
        v_weights=[decode_array(a) for a in doc["v_weights"]],
        v_biases=[decode_array(a) for a in doc["v_biases"]],
        step=doc["step"], lr=doc["lr"], beta1=doc["beta1"],
        beta2=doc["beta2"], eps=doc["eps"],
    )
