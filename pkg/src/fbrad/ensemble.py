"""Plain, feature-bagging (FB) and feature-bagging-with-nested-rotations (FBR)
ensembles, thresholding and majority voting."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Standardizer, make_windows, standardize_apply, standardize_fit
from .detectors import DetectorSpec, TrainedDetector, TrainingConfig, fit_detector, score_windows
from .errors import ValidationError
from .linalg import NestedRotation, block_diag, pca_rotation, subsample_rows

METHODS = ("plain", "fb", "fbr")
THRESHOLD_MODES = ("paper_iqr", "tukey")


@dataclass(frozen=True)
class EnsembleConfig:
    M: int = 17
    K: int = 2
    subsample_fraction: float = 0.75
    method: str = "fbr"
    detector_specs: tuple[DetectorSpec, ...] = (DetectorSpec("dense_autoencoder"),)
    threshold_mode: str = "paper_iqr"
    W: int = 32
    seed: int = 0
    train_stride: int = 1
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self):
        object.__setattr__(self, "detector_specs", tuple(self.detector_specs))
        if self.M < 1:
            raise ValidationError("M must be >= 1")
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValidationError("subsample_fraction must lie in (0, 1]")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValidationError(f"threshold_mode must be one of {THRESHOLD_MODES}")
        if not self.detector_specs:
            raise ValidationError("at least one detector spec is required")
        if self.W < 1 or self.train_stride < 1:
            raise ValidationError("W and train_stride must be positive")


@dataclass(frozen=True)
class EnsembleMember:
    feature_subset: tuple[int, ...]
    rotation: NestedRotation
    detector: TrainedDetector
    threshold: float
    standardizer: Standardizer

    def transform(self, data) -> np.ndarray:
        z = standardize_apply(self.standardizer, data)
        return self.rotation.apply(z[:, list(self.feature_subset)])


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-point scores (n, M) and their binarization against each member's threshold."""

    scores: np.ndarray
    binary: np.ndarray


def member_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one member, addressed by ``(seed, *key)``.

    Streams are derived from the key alone, never from call order, so members
    can be built in any order or concurrently.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def sample_feature_subset(d: int, rng: np.random.Generator) -> list[int]:
    """Size uniform on {floor(d/2), ..., d-1}; indices distinct, sorted."""
    if d < 2:
        raise ValidationError("feature bagging needs d >= 2")
    size = int(rng.integers(d // 2, d))
    return sorted(int(j) for j in rng.choice(d, size=size, replace=False))


def partition_features(subset, K: int, rng: np.random.Generator) -> list[list[int]]:
    """Shuffle ``subset`` and cut it into K groups whose sizes differ by at most one."""
    subset = list(subset)
    if not 1 <= K <= len(subset):
        raise ValidationError(f"cannot cut {len(subset)} features into {K} groups")
    perm = [subset[i] for i in rng.permutation(len(subset))]
    base, extra = divmod(len(perm), K)
    groups, at = [], 0
    for k in range(K):
        size = base + (k < extra)
        groups.append(perm[at:at + size])
        at += size
    return groups


def nested_rotation(data, K: int, fraction: float, rng: np.random.Generator) -> NestedRotation:
    """Partition the columns of ``data`` into K groups and rotate each by the
    PCA axes of its own row subsample."""
    q = data.shape[1]
    layout = partition_features(range(q), K, rng)
    blocks = []
    for group in layout:
        sample = subsample_rows(data[:, group], fraction, rng)
        blocks.append(pca_rotation(sample).eigenvectors)
    return NestedRotation(tuple(tuple(g) for g in layout), tuple(blocks), block_diag(blocks))


def quantile(values, p: float) -> float:
    """Linear interpolation between order statistics (R's type 7)."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), p, method="linear"))


def fit_threshold(train_scores, mode: str = "paper_iqr") -> float:
    """``paper_iqr``: 1.5*IQR, or Q3 when the IQR is zero. ``tukey``: Q3 + 1.5*IQR."""
    s = np.asarray(train_scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 4:
        raise ValidationError("fit_threshold needs at least 4 scores")
    if mode not in THRESHOLD_MODES:
        raise ValidationError(f"threshold mode must be one of {THRESHOLD_MODES}")
    q1, q3 = quantile(s, 0.25), quantile(s, 0.75)
    iqr = q3 - q1
    if mode == "tukey":
        return q3 + 1.5 * iqr
    return 1.5 * iqr if iqr > 0 else q3


def binarize(scores, threshold: float) -> np.ndarray:
    return (np.asarray(scores) > threshold).astype(np.int8)


def majority_vote(binary) -> np.ndarray | int:
    """1 where strictly more than half the members vote 1; ties vote normal.

    Accepts one vote vector (returns an int) or an (n, M) matrix (returns a
    length-n vector).
    """
    b = np.asarray(binary)
    if b.shape[-1] < 1:
        raise ValidationError("majority vote needs at least one member")
    votes = (2 * b.sum(axis=-1) > b.shape[-1]).astype(np.int8)
    return int(votes) if votes.ndim == 0 else votes


def build_member(train, cfg: EnsembleConfig, member_index: int,
                 rng: np.random.Generator | None = None) -> EnsembleMember:
    x = np.asarray(train, dtype=np.float64)
    n, d = x.shape
    if n < cfg.W + 8:
        raise ValidationError(f"{n} training rows; need at least W + 8 = {cfg.W + 8}")
    rng = member_rng(cfg.seed, member_index) if rng is None else rng

    standardizer = standardize_fit(x)
    z = standardize_apply(standardizer, x)
    subset = list(range(d)) if cfg.method == "plain" else sample_feature_subset(d, rng)
    zs = z[:, subset]
    if cfg.method == "fbr":
        rotation = nested_rotation(zs, min(cfg.K, len(subset)), cfg.subsample_fraction, rng)
    else:
        rotation = NestedRotation.identity(len(subset))
    # the rotation is fit on subsamples but applied to every training row
    transformed = rotation.apply(zs)

    spec = cfg.detector_specs[member_index % len(cfg.detector_specs)]
    train_windows = make_windows(transformed, cfg.W, cfg.train_stride)
    detector = fit_detector(spec, train_windows, cfg.training, rng)
    all_windows = train_windows if cfg.train_stride == 1 else make_windows(transformed, cfg.W, 1)
    threshold = fit_threshold(score_windows(detector, all_windows), cfg.threshold_mode)
    return EnsembleMember(tuple(subset), rotation, detector, threshold, standardizer)


def fit_ensemble(train, cfg: EnsembleConfig, stream: tuple[int, ...] = (),
                 threads: int = 1) -> list[EnsembleMember]:
    """Build ``cfg.M`` members; member ``j`` draws from stream ``(*stream, j)``.

    Detector specs are assigned round-robin. Results do not depend on
    ``threads``.
    """
    def build(j):
        return build_member(train, cfg, j, member_rng(cfg.seed, *stream, j))

    if threads <= 1 or cfg.M == 1:
        return [build(j) for j in range(cfg.M)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(build, range(cfg.M)))


def window_scores_to_points(window_scores, n: int, window_length: int) -> np.ndarray:
    """A point takes the score of the window ending at it; the first W-1
    points take the first window's score."""
    s = np.asarray(window_scores, dtype=np.float64)
    out = np.empty(n)
    out[window_length - 1:] = s
    out[:window_length - 1] = s[0]
    return out


def member_point_scores(member: EnsembleMember, data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    w = member.detector.window_length
    if x.ndim != 2 or x.shape[1] != member.standardizer.d:
        raise ValidationError(f"eval data has shape {x.shape}; expected {member.standardizer.d} columns")
    if x.shape[0] < w:
        raise ValidationError(f"eval data has {x.shape[0]} rows; need at least W = {w}")
    windows = make_windows(member.transform(x), w, 1)
    return window_scores_to_points(score_windows(member.detector, windows), x.shape[0], w)


def score_points(members, data) -> ScoreMatrix:
    scores = np.column_stack([member_point_scores(m, data) for m in members])
    thresholds = np.array([m.threshold for m in members])
    return ScoreMatrix(scores, (scores > thresholds).astype(np.int8))


def ensemble_output(members, data) -> tuple[np.ndarray, np.ndarray]:
    """Continuous score and binary decision per point.

    A single member reports its raw score; larger ensembles report the
    fraction of members voting anomaly.
    """
    sm = score_points(members, data)
    binary = majority_vote(sm.binary)
    if len(members) == 1:
        return sm.scores[:, 0], binary
    return sm.binary.mean(axis=1), binary


def split_ab(n: int, W: int) -> tuple[range, range]:
    """Contiguous halves of a training part; B takes the odd point."""
    if n < 2 * (W + 8):
        raise ValidationError(f"training part of {n} points is too small to halve (W={W})")
    half = n // 2
    return range(0, half), range(half, n)
