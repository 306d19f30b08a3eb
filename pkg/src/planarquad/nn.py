"""Minimal dense network stack: MLP forward/backward, Adam, Polyak averaging.

Networks are plain value objects (lists of weight/bias arrays); all updates
are deterministic given identical inputs and state.  Checkpoints serialize
to .npz (shapes + row-major float64 values) and reload bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class DimensionMismatch(ValueError):
    pass


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # each (out, in)
    biases: list[np.ndarray]   # each (out,)
    output_activation: str = "tanh"  # "tanh" or "identity"; hidden are relu

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_width(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases],
                         self.output_activation)

    def check_chain(self) -> None:
        for k in range(1, len(self.weights)):
            if self.weights[k].shape[1] != self.weights[k - 1].shape[0]:
                raise DimensionMismatch("layer widths do not chain")


def init_mlp(sizes: list[int], rng: np.random.Generator,
             output_activation: str = "tanh",
             final_scale: float = 1.0) -> MlpParams:
    """Uniform +-1/sqrt(fan_in) init; final layer optionally scaled down."""
    weights, biases = [], []
    for k in range(len(sizes) - 1):
        fan_in = sizes[k]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(sizes[k + 1], sizes[k]))
        b = rng.uniform(-bound, bound, size=sizes[k + 1])
        if k == len(sizes) - 2:
            w *= final_scale
            b *= final_scale
        weights.append(w)
        biases.append(b)
    return MlpParams(weights, biases, output_activation)


def _apply_out(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    raise ValueError(f"unknown output activation {kind!r}")


def forward(net: MlpParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network; accepts (in,) or (batch, in)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != net.input_width:
        raise DimensionMismatch(
            f"input width {a.shape[1]} != {net.input_width}")
    n = len(net.weights)
    for k in range(n):
        z = a @ net.weights[k].T + net.biases[k]
        a = np.maximum(z, 0.0) if k < n - 1 else _apply_out(z, net.output_activation)
    return a[0] if single else a


def forward_cached(net: MlpParams, x: np.ndarray
                   ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward keeping post-activation values for backward."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != net.input_width:
        raise DimensionMismatch(
            f"input width {a.shape[1]} != {net.input_width}")
    acts = [a]
    n = len(net.weights)
    for k in range(n):
        z = acts[-1] @ net.weights[k].T + net.biases[k]
        acts.append(np.maximum(z, 0.0) if k < n - 1
                    else _apply_out(z, net.output_activation))
    return acts[-1], acts


def backward(net: MlpParams, x: np.ndarray, output_gradient: np.ndarray
             ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Reverse-mode gradients of the forward map at input x."""
    _, acts = forward_cached(net, x)
    return backward_from_acts(net, acts, output_gradient)


def backward_from_acts(net: MlpParams, acts: list[np.ndarray],
                       output_gradient: np.ndarray
                       ) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Reverse-mode gradients given cached activations.

    output_gradient is dL/d(output), shape (batch, out).  Returns
    (weight grads, bias grads, input gradient), grads summed over the batch.
    """
    g = np.asarray(output_gradient, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    n = len(net.weights)
    if g.shape != acts[-1].shape:
        raise DimensionMismatch("output_gradient shape mismatch")
    gw = [None] * n
    gb = [None] * n
    if net.output_activation == "tanh":
        g = g * (1.0 - acts[-1] ** 2)
    for k in range(n - 1, -1, -1):
        gw[k] = g.T @ acts[k]
        gb[k] = g.sum(axis=0)
        g = g @ net.weights[k]
        if k > 0:
            g = g * (acts[k] > 0.0)
    return gw, gb, g


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: MlpParams, lr: float = 1e-3) -> "AdamState":
        return cls(lr=lr,
                   m_w=[np.zeros_like(w) for w in net.weights],
                   v_w=[np.zeros_like(w) for w in net.weights],
                   m_b=[np.zeros_like(b) for b in net.biases],
                   v_b=[np.zeros_like(b) for b in net.biases])


def adam_step(state: AdamState, net: MlpParams,
              grads_w: list[np.ndarray], grads_b: list[np.ndarray]) -> None:
    """In-place Adam update with bias correction."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k in range(len(net.weights)):
        for m, v, p, g in ((state.m_w[k], state.v_w[k], net.weights[k], grads_w[k]),
                           (state.m_b[k], state.v_b[k], net.biases[k], grads_b[k])):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def polyak_update(target: MlpParams, source: MlpParams, tau: float) -> MlpParams:
    """target <- tau*source + (1-tau)*target, elementwise, in place."""
    if len(target.weights) != len(source.weights):
        raise DimensionMismatch("network depths differ")
    for k in range(len(target.weights)):
        if target.weights[k].shape != source.weights[k].shape:
            raise DimensionMismatch("layer shapes differ")
        target.weights[k] *= 1.0 - tau
        target.weights[k] += tau * source.weights[k]
        target.biases[k] *= 1.0 - tau
        target.biases[k] += tau * source.biases[k]
    return target


def save_checkpoint(path, nets: dict[str, MlpParams],
                    meta: dict | None = None) -> None:
    """Write named networks (+ JSON metadata) to a .npz file."""
    arrays: dict[str, np.ndarray] = {}
    spec: dict[str, dict] = {}
    for name, net in nets.items():
        spec[name] = {"layers": len(net.weights),
                      "output_activation": net.output_activation}
        for k, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"{name}__w{k}"] = w
            arrays[f"{name}__b{k}"] = b
    arrays["__meta__"] = np.frombuffer(
        json.dumps({"nets": spec, "meta": meta or {}},
                   sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[dict[str, MlpParams], dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["__meta__"]).decode())
        nets = {}
        for name, s in header["nets"].items():
            weights = [data[f"{name}__w{k}"].astype(float)
                       for k in range(s["layers"])]
            biases = [data[f"{name}__b{k}"].astype(float)
                      for k in range(s["layers"])]
            nets[name] = MlpParams(weights, biases, s["output_activation"])
    return nets, header["meta"]
