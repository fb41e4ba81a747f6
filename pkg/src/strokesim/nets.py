"""Dense feed-forward networks with hand-written backprop and Adam.

Deliberately tiny: ReLU hidden layers, tanh or linear output, float64
everywhere, explicit forward caches instead of a tape.  Keeping the
whole pipeline in plain numpy makes training bit-for-bit reproducible
from a seed, which the evaluation harness relies on.

Allocation churn dominates the cost of repeated batch updates, so
forward() and backward() optionally recycle the buffers of a previous
call (same network, same batch shape).  Reuse changes where results are
stored, never their values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MLP",
    "AdamState",
    "ForwardCache",
    "Grads",
    "adam_step",
    "backward",
    "backward_input",
    "forward",
    "init_mlp",
]

ACTIVATIONS = ("tanh", "linear")

#: per-layer (dW, db) pairs, shaped like the network's parameters
Grads = list[tuple[np.ndarray, np.ndarray]]


@dataclass
class MLP:
    weights: list[np.ndarray]  # each (fan_in, fan_out)
    biases: list[np.ndarray]
    output_activation: str

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.output_activation)


def init_mlp(sizes: tuple[int, ...], output_activation: str, rng: np.random.Generator) -> MLP:
    """He-uniform hidden layers, small-uniform final layer, zero biases."""
    if output_activation not in ACTIVATIONS:
        raise ValueError(f"output_activation must be one of {ACTIVATIONS}")
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output width")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer widths must be >= 1, got {sizes}")
    weights, biases = [], []
    last = len(sizes) - 2
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = 3e-3 if i == last else np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLP(weights, biases, output_activation)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # layer inputs: [x, h1, ..., h_{L-1}]
    pre_acts: list[np.ndarray]
    y: np.ndarray
    single: bool
    bwd: dict = field(default_factory=dict)  # backward scratch, lazily built


def _cache_fits(net: MLP, cache: ForwardCache | None, batch: int) -> bool:
    if cache is None or len(cache.pre_acts) != len(net.weights):
        return False
    return all(
        z.shape == (batch, w.shape[1]) for z, w in zip(cache.pre_acts, net.weights)
    )


def forward(net: MLP, x: np.ndarray, cache: ForwardCache | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on one input vector or a (batch, width) matrix.

    Pass the cache of a previous forward through the same network (and
    batch size) to reuse its buffers; that call's cache contents are
    overwritten.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2 or h.shape[1] != net.weights[0].shape[0]:
        raise ValueError(f"input width {h.shape[-1]} does not match network input {net.weights[0].shape[0]}")
    batch = h.shape[0]
    n_layers = len(net.weights)
    if _cache_fits(net, cache, batch):
        assert cache is not None
        cache.inputs[0] = h
        cache.single = single
    else:
        cache = ForwardCache(
            inputs=[h] + [np.empty((batch, w.shape[1])) for w in net.weights[:-1]],
            pre_acts=[np.empty((batch, w.shape[1])) for w in net.weights],
            y=np.empty((batch, net.weights[-1].shape[1])),
            single=single,
        )
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = cache.pre_acts[i]
        np.matmul(h, w, out=z)
        z += b
        if i < n_layers - 1:
            h = cache.inputs[i + 1]
            np.maximum(z, 0.0, out=h)
    if net.output_activation == "tanh":
        np.tanh(cache.pre_acts[-1], out=cache.y)
    else:
        cache.y = cache.pre_acts[-1]
    y = cache.y
    return (y[0] if single else y), cache


def _check_cache(net: MLP, cache: ForwardCache) -> None:
    sizes = net.sizes
    if len(cache.pre_acts) != len(net.weights) or any(
        z.shape[1] != sizes[i + 1] for i, z in enumerate(cache.pre_acts)
    ):
        raise ValueError("forward cache does not match this network")


def _output_delta(net: MLP, cache: ForwardCache, dy: np.ndarray, buf: np.ndarray | None) -> np.ndarray:
    dy = np.asarray(dy, dtype=float)
    d = dy[None, :] if cache.single else dy
    if d.shape != cache.y.shape:
        raise ValueError(f"dL_dy shape {d.shape} does not match output {cache.y.shape}")
    if net.output_activation == "tanh":
        out = buf if buf is not None and buf.shape == d.shape else np.empty_like(d)
        np.multiply(cache.y, cache.y, out=out)
        np.subtract(1.0, out, out=out)
        out *= d
        return out
    return d


def _bwd_scratch(cache: ForwardCache) -> dict:
    scratch = cache.bwd
    if "delta" not in scratch or any(
        buf.shape != z.shape for buf, z in zip(scratch["delta"], cache.pre_acts)
    ):
        scratch["delta"] = [np.empty_like(z) for z in cache.pre_acts]
    return scratch


def backward(
    net: MLP, cache: ForwardCache, dy: np.ndarray, grads: Grads | None = None
) -> tuple[Grads, np.ndarray]:
    """Reverse-mode gradients of all parameters and of the input.

    `dy` is dL/dy from the loss; returns (grads, dL/dx).  Does not touch
    the network's parameters.  Pass a previous call's grads list to
    reuse its arrays.
    """
    _check_cache(net, cache)
    scratch = _bwd_scratch(cache)
    n_layers = len(net.weights)
    delta = _output_delta(net, cache, dy, scratch["delta"][-1])
    if grads is None or len(grads) != n_layers or any(
        g[0].shape != w.shape for g, w in zip(grads, net.weights)
    ):
        grads = [(np.empty_like(w), np.empty_like(b)) for w, b in zip(net.weights, net.biases)]
    dx = None
    for i in range(n_layers - 1, -1, -1):
        np.matmul(cache.inputs[i].T, delta, out=grads[i][0])
        np.sum(delta, axis=0, out=grads[i][1])
        if i > 0:
            nxt = scratch["delta"][i - 1]
            np.matmul(delta, net.weights[i].T, out=nxt)
            nxt *= cache.pre_acts[i - 1] > 0.0
            delta = nxt
        else:
            dx = delta @ net.weights[0].T
    return grads, (dx[0] if cache.single else dx)


def backward_input(net: MLP, cache: ForwardCache, dy: np.ndarray) -> np.ndarray:
    """dL/dx only, skipping parameter gradients (cheaper when the network
    is frozen, e.g. differentiating a critic with respect to the action)."""
    _check_cache(net, cache)
    scratch = _bwd_scratch(cache)
    delta = _output_delta(net, cache, dy, scratch["delta"][-1])
    for i in range(len(net.weights) - 1, 0, -1):
        nxt = scratch["delta"][i - 1]
        np.matmul(delta, net.weights[i].T, out=nxt)
        nxt *= cache.pre_acts[i - 1] > 0.0
        delta = nxt
    dx = delta @ net.weights[0].T
    return dx[0] if cache.single else dx


@dataclass
class AdamState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: MLP, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        zeros = lambda: [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]
        return cls(m=zeros(), v=zeros(), beta1=beta1, beta2=beta2, eps=eps)


def adam_step(net: MLP, grads: Grads, state: AdamState, lr: float) -> None:
    """One Adam update, in place, with the standard bias correction."""
    if len(grads) != len(net.weights):
        raise ValueError("gradient list does not match network layout")
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for i, (dw, db) in enumerate(grads):
        if dw.shape != net.weights[i].shape or db.shape != net.biases[i].shape:
            raise ValueError(f"gradient shape mismatch at layer {i}")
        for param, grad, m, v in (
            (net.weights[i], dw, state.m[i][0], state.v[i][0]),
            (net.biases[i], db, state.m[i][1], state.v[i][1]),
        ):
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            param -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
