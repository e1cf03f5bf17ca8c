"""Covariance, symmetric eigendecomposition and PCA block rotations.

Data matrices are row-major observations: a rotation ``R`` maps a row ``x``
to ``x @ R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError

MAX_EIGEN_DIM = 64


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues sorted descending; column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class NestedRotation:
    """Block-diagonal rotation of a bagged feature subset.

    ``partition_layout[k]`` lists local column indices (positions within the
    subset) covered by ``blocks[k]``. The assembled matrix acts on the subset
    columns after they have been reordered so the partitions are contiguous,
    which ``apply`` handles.
    """

    partition_layout: tuple[tuple[int, ...], ...]
    blocks: tuple[np.ndarray, ...]
    assembled: np.ndarray

    @property
    def order(self) -> np.ndarray:
        return np.array([j for group in self.partition_layout for j in group], dtype=np.intp)

    def apply(self, data) -> np.ndarray:
        x = np.asarray(data, dtype=np.float64)
        return apply_rotation(self.assembled, x[:, self.order])

    @classmethod
    def identity(cls, q: int) -> NestedRotation:
        eye = np.eye(q)
        return cls((tuple(range(q)),), (eye,), eye)


def _as_matrix(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def covariance(data) -> np.ndarray:
    """Population covariance (divides by the row count)."""
    x = _as_matrix(data, "data")
    m = x.shape[0]
    if m < 2:
        raise ValidationError("covariance needs at least 2 rows")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / m
    return 0.5 * (cov + cov.T)


def _off_norm(a) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def eigh_symmetric(a, tol: float = 1e-12, max_sweeps: int = 100) -> EigenResult:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
    drops to ``tol * ||A||_F``. Eigenpairs are sorted by descending eigenvalue
    (stable for ties) and each eigenvector is signed so its largest-magnitude
    entry is positive.
    """
    a = _as_matrix(a, "A")
    p = a.shape[0]
    if a.shape != (p, p) or p == 0:
        raise ValidationError(f"A must be square and non-empty, got {a.shape}")
    if p > MAX_EIGEN_DIM:
        raise ValidationError(f"A is {p}x{p}; at most {MAX_EIGEN_DIM} supported")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-10 * scale:
        raise ValidationError("A is not symmetric")

    a = 0.5 * (a + a.T)
    v = np.eye(p)
    target = tol * max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = _off_norm(a)
        if off <= target:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = a[i, j]
                if aij == 0.0:
                    continue
                theta = (a[j, j] - a[i, i]) / (2.0 * aij)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                col_i, col_j = a[:, i].copy(), a[:, j].copy()
                a[:, i] = c * col_i - s * col_j
                a[:, j] = s * col_i + c * col_j
                row_i, row_j = a[i, :].copy(), a[j, :].copy()
                a[i, :] = c * row_i - s * row_j
                a[j, :] = s * row_i + c * row_j
                a[i, j] = a[j, i] = 0.0
                v_i, v_j = v[:, i].copy(), v[:, j].copy()
                v[:, i] = c * v_i - s * v_j
                v[:, j] = s * v_i + c * v_j
    else:
        off = _off_norm(a)
        if off > target:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off:.3e})")

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    lead = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[lead, np.arange(p)] < 0, -1.0, 1.0)
    return EigenResult(w, v * signs)


def pca_rotation(data) -> EigenResult:
    """All principal axes of ``data``; no components are dropped."""
    return eigh_symmetric(covariance(data))


def block_diag(blocks) -> np.ndarray:
    blocks = [_as_matrix(b, "block") for b in blocks]
    if not blocks:
        raise ValidationError("block_diag needs at least one block")
    for b in blocks:
        if b.shape[0] != b.shape[1]:
            raise ValidationError(f"block of shape {b.shape} is not square")
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    at = 0
    for b in blocks:
        k = b.shape[0]
        out[at:at + k, at:at + k] = b
        at += k
    return out


def apply_rotation(r, data) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    x = np.asarray(data, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError(f"rotation must be square, got {r.shape}")
    if x.ndim != 2 or x.shape[1] != r.shape[0]:
        raise ValidationError(f"data with shape {x.shape} does not match rotation {r.shape}")
    return x @ r


def subsample_rows(data, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """``ceil(fraction * rows)`` distinct rows drawn without replacement, in original order."""
    x = np.asarray(data, dtype=np.float64)
    if not 0.0 < fraction <= 1.0:
        raise ValidationError("fraction must lie in (0, 1]")
    rows = x.shape[0]
    k = math.ceil(fraction * rows - 1e-9)
    if k < 2:
        raise ValidationError(f"subsample of {k} rows is too small")
    if k == rows:
        return x.copy()
    idx = np.sort(rng.choice(rows, size=k, replace=False))
    return x[idx]
