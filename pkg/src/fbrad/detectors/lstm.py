"""Single-layer LSTM that forecasts the next step of a window."""

from __future__ import annotations

import math

import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LSTMForecaster:
    """LSTM over the window steps with a linear readout predicting step t+1.

    Gates are stacked in the order input, forget, cell, output. Parameter
    layout: Wx (q, 4H), Wh (H, 4H), b (4H), Wy (H, q), by (q), each row-major.
    """

    kind = "lstm_forecaster"

    def __init__(self, input_dim: int, hidden: int):
        self.q = input_dim
        self.h = hidden
        q, h = input_dim, hidden
        self.shapes = [(q, 4 * h), (h, 4 * h), (4 * h,), (h, q), (q,)]
        self.n_params = sum(math.prod(s) for s in self.shapes)

    def unpack(self, params):
        out, at = [], 0
        for s in self.shapes:
            size = math.prod(s)
            out.append(params[at:at + size].reshape(s))
            at += size
        return out

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        gate_bound = 1.0 / math.sqrt(self.q + self.h)
        out_bound = 1.0 / math.sqrt(self.h)
        bounds = [gate_bound, gate_bound, gate_bound, out_bound, out_bound]
        return np.concatenate([rng.uniform(-b, b, size=math.prod(s))
                               for s, b in zip(self.shapes, bounds)])

    def _forward(self, params, x):
        wx, wh, b, wy, by = self.unpack(params)
        n, steps, _ = x.shape
        h = self.h
        hs = np.zeros((steps, n, h))
        cs = np.zeros((steps, n, h))
        gates = np.zeros((steps - 1, n, 4 * h))
        h_prev = np.zeros((n, h))
        c_prev = np.zeros((n, h))
        xin = x[:, :-1, :].transpose(1, 0, 2) @ wx + b
        for t in range(steps - 1):
            z = xin[t] + h_prev @ wh
            g = np.empty_like(z)
            g[:, :2 * h] = _sigmoid(z[:, :2 * h])
            g[:, 2 * h:3 * h] = np.tanh(z[:, 2 * h:3 * h])
            g[:, 3 * h:] = _sigmoid(z[:, 3 * h:])
            c_prev = g[:, h:2 * h] * c_prev + g[:, :h] * g[:, 2 * h:3 * h]
            h_prev = g[:, 3 * h:] * np.tanh(c_prev)
            gates[t], cs[t + 1], hs[t + 1] = g, c_prev, h_prev
        # hs[t+1] is the state after reading step t; it predicts step t+1
        pred = hs[1:] @ wy + by
        target = x[:, 1:, :].transpose(1, 0, 2)
        return hs, cs, gates, pred - target

    def score(self, params, x) -> np.ndarray:
        diff = self._forward(params, x)[3]
        return np.mean(diff * diff, axis=(0, 2))

    def loss_and_grad(self, params, x):
        wx, wh, b, wy, by = self.unpack(params)
        hs, cs, gates, diff = self._forward(params, x)
        loss = float(np.mean(diff * diff))
        grad = np.zeros_like(params)
        gwx, gwh, gb, gwy, gby = self.unpack(grad)
        h = self.h
        dpred = 2.0 * diff / diff.size
        gwy[:] = np.einsum("tnh,tnq->hq", hs[1:], dpred)
        gby[:] = dpred.sum(axis=(0, 1))
        dh_all = dpred @ wy.T
        steps = gates.shape[0]
        dz = np.empty_like(gates)
        dh_next = np.zeros_like(hs[0])
        dc_next = np.zeros_like(hs[0])
        for t in range(steps - 1, -1, -1):
            g = gates[t]
            i, f, c_hat, o = g[:, :h], g[:, h:2 * h], g[:, 2 * h:3 * h], g[:, 3 * h:]
            tc = np.tanh(cs[t + 1])
            dh = dh_all[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            d = dz[t]
            d[:, :h] = dc * c_hat * i * (1.0 - i)
            d[:, h:2 * h] = dc * cs[t] * f * (1.0 - f)
            d[:, 2 * h:3 * h] = dc * i * (1.0 - c_hat * c_hat)
            d[:, 3 * h:] = dh * tc * o * (1.0 - o)
            dh_next = d @ wh.T
            dc_next = dc * f
        gwx[:] = np.einsum("tnq,tnk->qk", x[:, :-1, :].transpose(1, 0, 2), dz)
        gwh[:] = np.einsum("tnh,tnk->hk", hs[:-1][:steps], dz)
        gb[:] = dz.sum(axis=(0, 1))
        return loss, grad
