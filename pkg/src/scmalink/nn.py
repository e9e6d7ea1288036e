"""Minimal dense network engine and the multi-task SCMA decoder.

One shared trunk maps the 2K-dimensional real received vector to a common
representation; J per-user subnetworks classify it into one of M messages
through a softmax head. Forward, analytic backward and ADAM are implemented
directly on numpy arrays; batches are row-major (samples x features) and all
arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ShapeError

LOG_CLAMP = 1e-30  # avoids -inf on collapsed probabilities


def relu(z):
    return np.maximum(z, 0.0)


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


_ACTIVATIONS = ("relu", "linear", "softmax")


class DenseLayer:
    """Affine map plus activation; caches inputs for the backward pass."""

    def __init__(self, weights, bias, activation="relu"):
        w = np.asarray(weights, dtype=float)
        b = np.asarray(bias, dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ShapeError(f"weights {w.shape} and bias {b.shape} are inconsistent")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ConfigError("layer parameters must be finite")
        if activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.weights = w
        self.bias = b
        self.activation = activation
        self.grad_weights = np.zeros_like(w)
        self.grad_bias = np.zeros_like(b)
        self._input = None
        self._preact = None

    @classmethod
    def gaussian(cls, rng, n_in, n_out, activation="relu", std=1.0):
        """Weights ~ normal(0, std^2), zero bias."""
        return cls(rng.normal(0.0, std, size=(n_out, n_in)), np.zeros(n_out), activation)

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]

    def forward(self, x, remember=False):
        z = x @ self.weights.T + self.bias
        if remember:
            self._input = x
            self._preact = z
        if self.activation == "relu":
            return relu(z)
        if self.activation == "softmax":
            return softmax(z)
        return z

    def backward_preact(self, grad_z):
        """Backward from the gradient w.r.t. the pre-activation z."""
        if self._input is None:
            raise ConfigError("backward called without a remembered forward pass")
        self.grad_weights = grad_z.T @ self._input
        self.grad_bias = grad_z.sum(axis=0)
        return grad_z @ self.weights

    def backward(self, grad_out):
        """Backward from the gradient w.r.t. the layer output."""
        if self.activation == "relu":
            grad_z = grad_out * (self._preact > 0)
        elif self.activation == "linear":
            grad_z = grad_out
        else:
            raise ConfigError(
                "softmax layers are fused with the cross-entropy loss; use backward_preact"
            )
        return self.backward_preact(grad_z)

    def parameters(self):
        return [self.weights, self.bias]

    def gradients(self):
        return [self.grad_weights, self.grad_bias]


class MultiTaskDecoder:
    """Shared dense trunk feeding J per-user softmax classification heads."""

    def __init__(self, shared, subnets):
        if not subnets:
            raise ConfigError("decoder needs at least one user subnetwork")
        for layer in shared:
            if layer.activation == "softmax":
                raise ConfigError("softmax is only allowed as a subnetwork head")
        out_w = shared[-1].n_out if shared else None
        m = subnets[0][-1].n_out
        for net in subnets:
            if shared and net[0].n_in != out_w:
                raise ShapeError(
                    f"subnet input width {net[0].n_in} does not match shared output {out_w}"
                )
            if net[-1].activation != "softmax" or net[-1].n_out != m:
                raise ConfigError("every subnetwork must end in a softmax head of equal width")
            for layer in net[:-1]:
                if layer.activation == "softmax":
                    raise ConfigError("softmax is only allowed as the terminal activation")
        self.shared = list(shared)
        self.subnets = [list(net) for net in subnets]

    @classmethod
    def build(cls, rng, input_width, n_users, n_messages,
              shared_widths=(128, 64), subnet_widths=(64, 32, 16), init_std="scaled"):
        """Fresh decoder with gaussian weights and zero biases.

        init_std "scaled" draws each layer from normal(0, 1/n_in), which keeps
        activations O(1) through the depth; a float selects one fixed standard
        deviation for every layer (1.0 gives plain unit-variance gaussians,
        which saturate the softmax heads and train poorly at this depth).
        """

        def std(n_in):
            return 1.0 / np.sqrt(n_in) if init_std == "scaled" else float(init_std)

        shared = []
        w_in = input_width
        for w_out in shared_widths:
            shared.append(DenseLayer.gaussian(rng, w_in, w_out, "relu", std(w_in)))
            w_in = w_out
        subnets = []
        for _ in range(n_users):
            net = []
            s_in = w_in
            for w_out in subnet_widths:
                net.append(DenseLayer.gaussian(rng, s_in, w_out, "relu", std(s_in)))
                s_in = w_out
            net.append(DenseLayer.gaussian(rng, s_in, n_messages, "softmax", std(s_in)))
            subnets.append(net)
        return cls(shared, subnets)

    @property
    def n_users(self):
        return len(self.subnets)

    @property
    def n_messages(self):
        return self.subnets[0][-1].n_out

    @property
    def input_width(self):
        return self.shared[0].n_in if self.shared else self.subnets[0][0].n_in

    def forward(self, r_split, remember=False):
        """Probabilities (batch, J, M) for real-split inputs (batch, 2K)."""
        x = np.asarray(r_split, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_width:
            raise ShapeError(f"input width {x.shape[1]}, decoder expects {self.input_width}")
        for layer in self.shared:
            x = layer.forward(x, remember)
        probs = np.stack(
            [self._subnet_forward(net, x, remember) for net in self.subnets], axis=1
        )
        return probs[0] if single else probs

    @staticmethod
    def _subnet_forward(net, x, remember):
        for layer in net:
            x = layer.forward(x, remember)
        return x

    def backward_cross_entropy(self, probs, labels):
        """Gradients of the batch-mean total cross-entropy; returns dL/d(input).

        Uses the fused softmax identity: the gradient at each head's
        pre-activation is (p - q) / batch.
        """
        if probs.shape != labels.shape:
            raise ShapeError(f"probs {probs.shape} and labels {labels.shape} differ")
        batch = probs.shape[0]
        grad_shared_out = 0.0
        for j, net in enumerate(self.subnets):
            g = net[-1].backward_preact((probs[:, j, :] - labels[:, j, :]) / batch)
            for layer in reversed(net[:-1]):
                g = layer.backward(g)
            grad_shared_out = grad_shared_out + g
        g = grad_shared_out
        for layer in reversed(self.shared):
            g = layer.backward(g)
        return g

    def layers(self):
        yield from self.shared
        for net in self.subnets:
            yield from net

    def parameters(self):
        return [p for layer in self.layers() for p in layer.parameters()]

    def gradients(self):
        return [g for layer in self.layers() for g in layer.gradients()]

    def widths(self):
        """Node counts of consecutive layers: shared chain and one subnet chain."""
        chain = [self.input_width] + [l.n_out for l in self.shared]
        sub = [chain[-1]] + [l.n_out for l in self.subnets[0]]
        return chain, sub


def cross_entropy(probs, labels) -> float:
    """Total cross-entropy summed over users, averaged over the batch."""
    p = np.asarray(probs, dtype=float)
    q = np.asarray(labels, dtype=float)
    if p.shape != q.shape:
        raise ShapeError(f"probs {p.shape} and labels {q.shape} differ")
    ce = -(q * np.log(np.maximum(p, LOG_CLAMP))).sum(axis=-1)
    if ce.ndim == 1:  # single sample (J,)
        return float(ce.sum())
    return float(ce.sum(axis=-1).mean())


def dnn_complexity(dec: MultiTaskDecoder) -> int:
    """Dominant matrix-multiplication cost: the largest consecutive width product."""
    chain, sub = dec.widths()
    pairs = [a * b for a, b in zip(chain, chain[1:])] + [a * b for a, b in zip(sub, sub[1:])]
    return int(max(pairs))


@dataclass
class AdamState:
    """First/second moment accumulators mirroring a parameter list."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_parameters(cls, params, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected ADAM update, in place on the parameter arrays."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ShapeError("parameter, gradient and state lists must align")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g**2
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
