"""Loading, synthesis, standardization, windowing and splitting of series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ParseError, ValidationError

DEFAULT_WINDOW = 32


@dataclass(frozen=True)
class TimeSeries:
    """A multivariate series: ``values`` is (n, d), one row per time point."""

    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("values must be a 2-D array")
        n, d = values.shape
        if n < 1:
            raise ValidationError("a series needs at least one row")
        if d < 2:
            raise ValidationError(f"a series needs at least 2 features, got {d}")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain non-finite entries")
        ts = np.asarray(self.timestamps)
        if ts.shape != (n,):
            raise ValidationError("timestamps must have one entry per row")
        if n > 1 and not np.all(ts[1:] > ts[:-1]):
            bad = int(np.flatnonzero(~(ts[1:] > ts[:-1]))[0]) + 1
            raise DataError(f"timestamps not strictly increasing at row {bad}")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (n,):
                raise ValidationError("labels must have one entry per row")
            if not np.all((labels == 0) | (labels == 1)):
                raise DataError("labels must be 0 or 1")
            labels = labels.astype(np.int8)
            labels.setflags(write=False)
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(d))
        if len(names) != d:
            raise ValidationError("feature_names must have one entry per column")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> TimeSeries:
        labels = None if self.labels is None else self.labels[start:stop]
        return TimeSeries(self.timestamps[start:stop], self.values[start:stop],
                          labels, self.feature_names, self.name)


def _parse_timestamp(text: str):
    try:
        return np.datetime64(datetime.fromisoformat(text.strip()), "ns")
    except ValueError:
        return float(text)


def load_skab_csv(path, delimiter: str = ";", label_col: str = "anomaly",
                  timestamp_col: str = "datetime",
                  require_labels: bool = True) -> TimeSeries:
    """Read a SKAB-style CSV file.

    The timestamp column is ``timestamp_col`` if present, otherwise the first
    column. A ``changepoint`` column is dropped. All remaining columns are
    features. When ``require_labels`` is false a missing label column yields
    an unlabeled series.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    if len(header) < 3 or any(not h for h in header):
        raise FormatError(f"{path}: unusable header {header!r}")
    if len(set(header)) != len(header):
        raise FormatError(f"{path}: duplicate column names in header")
    ts_idx = header.index(timestamp_col) if timestamp_col in header else 0
    if label_col in header:
        label_idx = header.index(label_col)
    elif require_labels:
        raise FormatError(f"{path}: no {label_col!r} column in header")
    else:
        label_idx = None
    skip = {ts_idx, label_idx}
    if "changepoint" in header:
        skip.add(header.index("changepoint"))
    feat_idx = [j for j in range(len(header)) if j not in skip]
    if not rows:
        raise DataError(f"{path}: no data rows")

    n = len(rows)
    values = np.empty((n, len(feat_idx)))
    labels = np.empty(n, dtype=np.int8) if label_idx is not None else None
    stamps = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        if any(not row[j].strip() for j in range(len(header))):
            raise DataError(f"{path}: missing value in row {i}")
        try:
            values[i] = [float(row[j]) for j in feat_idx]
        except ValueError:
            raise ParseError(f"{path}: non-numeric feature value in row {i}") from None
        if labels is not None:
            try:
                labels[i] = int(float(row[label_idx]))
            except ValueError:
                raise ParseError(f"{path}: bad label in row {i}") from None
        try:
            stamps.append(_parse_timestamp(row[ts_idx]))
        except ValueError:
            raise ParseError(f"{path}: unparsable timestamp in row {i}") from None

    if len({type(s) for s in stamps}) > 1:
        raise ParseError(f"{path}: mixed timestamp formats")
    timestamps = np.array(stamps)
    if timestamps.dtype == object:
        timestamps = timestamps.astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: missing or non-finite feature values")
    return TimeSeries(timestamps, values, labels,
                      tuple(header[j] for j in feat_idx), name=path.stem)


def generate_synthetic(n: int, d: int, anomaly_fraction: float, affected_features: int,
                       shift_sigmas: float, seed: int, segments: int = 3,
                       phi: float = 0.9, name: str = "") -> TimeSeries:
    """Build a labeled series of AR(1) noise with injected level-shift anomalies.

    ``ceil(anomaly_fraction * n)`` points are anomalous. They form ``segments``
    contiguous runs, one placed uniformly at random inside each of ``segments``
    equal strata of the time axis, so every stratum holds anomalies. One set
    of ``affected_features`` randomly chosen features is shifted up by
    ``shift_sigmas`` times the feature's standard deviation in every run.
    """
    if not 0.0 < anomaly_fraction < 1.0:
        raise ValidationError("anomaly_fraction must lie in (0, 1)")
    if d < 2 or n < 10 * d:
        raise ValidationError("need d >= 2 and n >= 10*d")
    if not 1 <= affected_features <= d:
        raise ValidationError("affected_features must be in [1, d]")
    n_anom = math.ceil(anomaly_fraction * n - 1e-9)
    if segments < 1 or n_anom < segments:
        raise ValidationError("need 1 <= segments <= number of anomalous points")
    stratum = n // segments
    sizes = [n_anom // segments + (k < n_anom % segments) for k in range(segments)]
    if max(sizes) > stratum:
        raise ValidationError("anomaly segments do not fit their strata")

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, d))
    base = np.empty((n, d))
    base[0] = noise[0]
    scale = math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        base[t] = phi * base[t - 1] + scale * noise[t]
    base += rng.normal(0.0, 2.0, size=d)
    base *= rng.uniform(0.5, 3.0, size=d)
    std = base.std(axis=0)

    values = base.copy()
    labels = np.zeros(n, dtype=np.int8)
    feats = np.sort(rng.choice(d, size=affected_features, replace=False))
    for k, size in enumerate(sizes):
        lo = k * stratum
        hi = n if k == segments - 1 else lo + stratum
        start = lo + int(rng.integers(0, hi - lo - size + 1))
        values[start:start + size, feats] += shift_sigmas * std[feats]
        labels[start:start + size] = 1

    timestamps = np.datetime64("2020-01-01T00:00:00", "ns") + np.arange(n) * np.timedelta64(1, "s")
    return TimeSeries(timestamps, values, labels, name=name or f"synthetic-{seed}")


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    @property
    def d(self) -> int:
        return self.means.shape[0]

    def inverse(self, data) -> np.ndarray:
        return np.asarray(data, dtype=np.float64) * self.stds + self.means


def standardize_fit(train) -> Standardizer:
    """Per-column mean and population std; constant columns get std 1."""
    x = train.values if isinstance(train, TimeSeries) else np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("standardize_fit needs a 2-D array with at least 2 rows")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > 1e-12 * np.maximum(1.0, np.abs(means)), stds, 1.0)
    return Standardizer(means, stds)


def standardize_apply(s: Standardizer, data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != s.d:
        raise ValidationError(f"expected {s.d} columns, got shape {x.shape}")
    return (x - s.means) / s.stds


@dataclass(frozen=True)
class WindowSet:
    """Sliding windows: ``windows[i]`` is the (W, d) slice ending at ``end_indices[i]``."""

    window_length: int
    stride: int
    windows: np.ndarray
    end_indices: np.ndarray

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def flat(self) -> np.ndarray:
        """(m, W*d) matrix; time-major, so entry ``t*d + j`` is step t, feature j."""
        m, w, d = self.windows.shape
        return self.windows.reshape(m, w * d)


def make_windows(values, window_length: int, stride: int = 1) -> WindowSet:
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("make_windows needs a 2-D array")
    if window_length < 1 or stride < 1:
        raise ValidationError("window length and stride must be positive")
    n = x.shape[0]
    if n < window_length:
        raise ValidationError(f"series of {n} points is shorter than window {window_length}")
    view = np.lib.stride_tricks.sliding_window_view(x, window_length, axis=0)
    # sliding_window_view puts the window axis last: (m, d, W) -> (m, W, d)
    windows = np.ascontiguousarray(view[::stride].transpose(0, 2, 1))
    m = (n - window_length) // stride + 1
    end = np.arange(m) * stride + window_length - 1
    return WindowSet(window_length, stride, windows, end)


@dataclass(frozen=True)
class DatasetSplit:
    parts: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def apply(self, series: TimeSeries) -> list[TimeSeries]:
        return [series.slice(a, b) for a, b in self.parts]


def split_series(series, fractions, min_size: int = 1) -> DatasetSplit:
    """Cut ``[0, n)`` into contiguous parts of ``floor(f*n)`` points; the last
    part takes the remainder."""
    n = series.n if isinstance(series, TimeSeries) else int(series)
    fractions = [float(f) for f in fractions]
    if not fractions or any(f <= 0 for f in fractions):
        raise ValidationError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"fractions sum to {sum(fractions)}, not 1")
    sizes = [math.floor(f * n + 1e-9) for f in fractions[:-1]]
    sizes.append(n - sum(sizes))
    if min(sizes) < min_size:
        raise ValidationError(f"split part of {min(sizes)} points is smaller than {min_size}")
    bounds = np.cumsum([0] + sizes)
    return DatasetSplit(tuple((int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])))
