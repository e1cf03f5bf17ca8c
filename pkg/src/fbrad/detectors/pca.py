"""Linear PCA reconstruction detector over flattened windows."""

from __future__ import annotations

import numpy as np


class LinearPCA:
    """Projects windows on the top ``components`` principal axes and scores
    the mean squared reconstruction residual.

    Parameter layout: mean (D,), then the (D, r) component matrix row-major.
    """

    kind = "linear_pca"

    def __init__(self, input_dim: int, components: int):
        self.input_dim = input_dim
        self.r = components
        self.n_params = input_dim + input_dim * components

    def unpack(self, params):
        d = self.input_dim
        return params[:d], params[d:].reshape(d, self.r)

    def fit(self, x) -> np.ndarray:
        mean = x.mean(axis=0)
        centered = x - mean
        cov = centered.T @ centered / x.shape[0]
        # windows can be wider than the Jacobi solver's size limit
        w, v = np.linalg.eigh(0.5 * (cov + cov.T))
        v = v[:, np.argsort(-w, kind="stable")[:self.r]]
        lead = np.argmax(np.abs(v), axis=0)
        v = v * np.where(v[lead, np.arange(self.r)] < 0, -1.0, 1.0)
        return np.concatenate([mean, v.ravel()])

    def reconstruct(self, params, x):
        mean, v = self.unpack(params)
        return (x - mean) @ v @ v.T + mean

    def score(self, params, x) -> np.ndarray:
        diff = self.reconstruct(params, x) - x
        return np.mean(diff * diff, axis=1)
