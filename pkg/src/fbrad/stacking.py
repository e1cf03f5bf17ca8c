"""Semi-supervised stacking: a logistic regressor over member scores."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Standardizer, standardize_apply, standardize_fit
from .ensemble import EnsembleMember, score_points
from .errors import ValidationError


@dataclass(frozen=True)
class StackedModel:
    members: tuple[EnsembleMember, ...]
    weights: np.ndarray
    bias: float
    score_standardizer: Standardizer


def build_stacking_dataset(members, data, labels):
    """Member scores on the regressor's split, standardized per member.

    Returns ``(features, targets, standardizer)``. Features are continuous
    scores, not votes.
    """
    if labels is None:
        raise ValidationError("stacking needs labels on the regressor split")
    y = np.asarray(labels)
    raw = score_points(members, data).scores
    if y.shape != (raw.shape[0],):
        raise ValidationError("labels must have one entry per row of data")
    scaler = standardize_fit(raw)
    return standardize_apply(scaler, raw), y.astype(np.int8), scaler


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss_and_grad(w, b: float, x, y, l2: float):
    """Mean log-loss plus ``l2/2 * ||w||^2``; the bias is not penalized."""
    z = x @ w + b
    # log(1 + e^z) - y*z, written to stay finite for large |z|
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = (_sigmoid(z) - y) / x.shape[0]
    return loss, x.T @ r + l2 * w, float(r.sum())


def fit_logistic(features, targets, l2: float = 1e-2, max_iter: int = 20000,
                 tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """L2-regularized logistic regression by accelerated gradient descent.

    Starts from zero, uses step ``1/L`` with ``L`` the gradient's Lipschitz
    bound, and restarts the momentum whenever the loss goes up. Stops when
    the full gradient norm is at most ``tol``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or y.shape != (x.shape[0],):
        raise ValidationError("need a 2-D feature matrix with >= 2 rows and one target per row")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("targets must be 0 or 1")
    if y.min() == y.max():
        raise ValidationError("both classes must be present in the targets")
    if l2 < 0:
        raise ValidationError("l2 must be nonnegative")

    n, p = x.shape

    def objective(theta):
        return logistic_loss_and_grad(theta[:p], theta[p], x, y, l2)

    def grad_of(theta):
        _, gw, gb = objective(theta)
        return np.append(gw, gb)

    xa = np.hstack([x, np.ones((n, 1))])
    step = 1.0 / (0.25 * np.linalg.norm(xa, 2) ** 2 / n + l2)
    theta = np.zeros(p + 1)
    look = theta
    loss = objective(theta)[0]
    momentum = 1.0
    for _ in range(max_iter):
        if np.linalg.norm(grad_of(theta)) <= tol:
            break
        candidate = look - step * grad_of(look)
        cand_loss = objective(candidate)[0]
        if cand_loss > loss:
            # momentum overshot: restart from the current iterate
            look, momentum = theta, 1.0
            continue
        next_momentum = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        look = candidate + ((momentum - 1.0) / next_momentum) * (candidate - theta)
        theta, loss, momentum = candidate, cand_loss, next_momentum
    return theta[:p].copy(), float(theta[p])


def fit_stacked(members, data, labels, l2: float = 1e-2, max_iter: int = 20000,
                tol: float = 1e-6) -> StackedModel:
    features, targets, scaler = build_stacking_dataset(members, data, labels)
    w, b = fit_logistic(features, targets, l2, max_iter, tol)
    return StackedModel(tuple(members), w, b, scaler)


def predict_stacked(model: StackedModel, data) -> tuple[np.ndarray, np.ndarray]:
    raw = score_points(model.members, data).scores
    z = standardize_apply(model.score_standardizer, raw) @ model.weights + model.bias
    # saturated logits would otherwise round to exactly 0 or 1
    prob = np.clip(_sigmoid(z), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return prob, (prob > 0.5).astype(np.int8)
