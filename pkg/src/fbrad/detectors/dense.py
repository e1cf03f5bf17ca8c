"""Fully connected autoencoder over flattened windows."""

from __future__ import annotations

import math

import numpy as np


def default_hidden(input_dim: int) -> list[int]:
    return [math.ceil(input_dim / 2), max(2, math.ceil(input_dim / 4))]


class DenseAutoencoder:
    """Mirror-symmetric MLP autoencoder with a linear output layer.

    Parameter layout: for each layer in order, the (fan_in, fan_out) weight
    matrix row-major, then the fan_out bias.
    """

    kind = "dense_autoencoder"

    def __init__(self, input_dim: int, hidden, activation: str = "tanh"):
        self.input_dim = input_dim
        self.sizes = [input_dim, *hidden, *reversed(hidden[:-1]), input_dim]
        self.activation = activation
        self.shapes = list(zip(self.sizes[:-1], self.sizes[1:]))
        self.n_params = sum(i * o + o for i, o in self.shapes)

    def unpack(self, params):
        layers, at = [], 0
        for i, o in self.shapes:
            w = params[at:at + i * o].reshape(i, o)
            at += i * o
            b = params[at:at + o]
            at += o
            layers.append((w, b))
        return layers

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        chunks = []
        for i, o in self.shapes:
            bound = 1.0 / math.sqrt(i)
            chunks.append(rng.uniform(-bound, bound, size=i * o))
            chunks.append(rng.uniform(-bound, bound, size=o))
        return np.concatenate(chunks)

    def _act(self, z):
        return np.tanh(z) if self.activation == "tanh" else z

    def forward(self, params, x):
        layers = self.unpack(params)
        acts = [x]
        a = x
        for k, (w, b) in enumerate(layers):
            z = a @ w + b
            a = z if k == len(layers) - 1 else self._act(z)
            acts.append(a)
        return acts

    def score(self, params, x) -> np.ndarray:
        y = self.forward(params, x)[-1]
        return np.mean((y - x) ** 2, axis=1)

    def loss_and_grad(self, params, x):
        layers = self.unpack(params)
        acts = self.forward(params, x)
        diff = acts[-1] - x
        loss = float(np.mean(diff * diff))
        grad = np.empty_like(params)
        views = self.unpack(grad)
        dz = 2.0 * diff / diff.size
        for k in range(len(layers) - 1, -1, -1):
            gw, gb = views[k]
            np.matmul(acts[k].T, dz, out=gw)
            gb[:] = dz.sum(axis=0)
            if k:
                da = dz @ layers[k][0].T
                dz = da * (1.0 - acts[k] ** 2) if self.activation == "tanh" else da
        return loss, grad
