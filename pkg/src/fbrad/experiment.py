"""Experiment protocol: split each series, fit, score, and macro-average."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import TimeSeries, generate_synthetic, split_series
from .detectors import KINDS, DetectorSpec
from .ensemble import EnsembleConfig, ensemble_output, fit_ensemble, majority_vote, score_points
from .errors import DataError, FbradError
from .metrics import ConfusionCounts, f1_score, macro_average, roc_auc
from .stacking import fit_stacked, predict_stacked

log = logging.getLogger(__name__)

MODES = ("plain", "fb", "fbr", "stacked")
# stream tags keep each mode's member randomness separate
_MODE_STREAM = {"plain": 0, "fb": 1, "fbr": 2, "stacked": 3}


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    split: tuple[float, ...] = (0.5, 0.5)
    stacked_split: tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    stacked_specs: tuple[DetectorSpec, ...] = tuple(DetectorSpec(k) for k in KINDS)
    stacked_members_per_kind: int = 12
    l2: float = 1e-3
    max_iter: int = 20000
    tol: float = 1e-6

    def to_dict(self) -> dict:
        return config_to_dict(self)


def config_to_dict(obj):
    if isinstance(obj, DetectorSpec):
        return {"kind": obj.kind, "hyperparameters": dict(obj.hyperparameters)}
    if hasattr(obj, "__dataclass_fields__"):
        return {k: config_to_dict(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, (list, tuple)):
        return [config_to_dict(v) for v in obj]
    return obj


@dataclass(frozen=True)
class Report:
    per_series: list[dict]
    macro: dict[str, dict[str, float]]
    config: dict
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["series", "method", "f1", "auc"])
        for row in self.per_series:
            writer.writerow([row["series"], row["method"], repr(row["f1"]), repr(row["auc"])])
        for method, vals in self.macro.items():
            writer.writerow(["MACRO", method, repr(vals["f1"]), repr(vals["auc"])])
        return buf.getvalue()


def _metrics(binary, score, labels) -> tuple[float, float]:
    return f1_score(ConfusionCounts.from_predictions(binary, labels)), roc_auc(score, labels)


def _unsupervised(series: TimeSeries, index: int, mode: str, cfg: ExperimentConfig):
    ens = cfg.ensemble
    ens = replace(ens, method=mode, M=1) if mode == "plain" else replace(ens, method=mode)
    train, test = split_series(series, cfg.split, min_size=ens.W + 8).apply(series)
    members = fit_ensemble(train.values, ens, stream=(index, _MODE_STREAM[mode]))
    score, binary = ensemble_output(members, test.values)
    return [(mode, *_metrics(binary, score, test.labels))]


def _stacked(series: TimeSeries, index: int, cfg: ExperimentConfig):
    ens = replace(cfg.ensemble, method="fbr", detector_specs=cfg.stacked_specs,
                  M=cfg.stacked_members_per_kind * len(cfg.stacked_specs))
    part_a, part_b, test = split_series(series, cfg.stacked_split, min_size=ens.W + 8).apply(series)
    members = fit_ensemble(part_a.values, ens, stream=(index, _MODE_STREAM["stacked"]))
    model = fit_stacked(members, part_b.values, part_b.labels, cfg.l2, cfg.max_iter, cfg.tol)
    prob, binary = predict_stacked(model, test.values)
    # the same members aggregated by majority vote, as the unsupervised reference
    votes = score_points(members, test.values).binary
    return [("stacked", *_metrics(binary, prob, test.labels)),
            ("stacked_vote", *_metrics(majority_vote(votes), votes.mean(axis=1), test.labels))]


def run_series(series: TimeSeries, index: int, mode: str, cfg: ExperimentConfig):
    if series.labels is None:
        raise DataError(f"series {series.name!r} has no labels")
    try:
        if mode == "stacked":
            return _stacked(series, index, cfg)
        return _unsupervised(series, index, mode, cfg)
    except FbradError as exc:
        raise type(exc)(f"series {series.name!r} ({mode}): {exc}") from exc


def run_experiment(corpus, cfg: ExperimentConfig, modes=("plain", "fb", "fbr"),
                   threads: int = 1) -> Report:
    """Run every mode on every series; series/mode tasks may run concurrently
    but are merged in corpus order."""
    modes = tuple(modes)
    bad = set(modes) - set(MODES)
    if bad:
        raise DataError(f"unknown modes {sorted(bad)}")
    corpus = list(corpus)
    tasks = [(i, s, m) for i, s in enumerate(corpus) for m in modes]

    def work(task):
        i, s, m = task
        log.info("series %s mode %s", s.name or i, m)
        return i, s, run_series(s, i, m, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    rows = []
    for i, s, out in results:
        for method, f1, auc in out:
            rows.append({"series": s.name or str(i), "method": method, "f1": f1, "auc": auc})
    macro = {}
    for method in dict.fromkeys(r["method"] for r in rows):
        sel = [r for r in rows if r["method"] == method]
        macro[method] = {"f1": macro_average([r["f1"] for r in sel]),
                         "auc": macro_average([r["auc"] for r in sel])}
    return Report(rows, macro, cfg.to_dict(), cfg.ensemble.seed)


def synthetic_corpus(count: int, n: int = 2000, d: int = 8, anomaly_fraction: float = 0.05,
                     affected_features: int = 2, shift_sigmas: float = 5.0, seed: int = 0,
                     segments: int = 3, phi: float = 0.9) -> list[TimeSeries]:
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [generate_synthetic(n, d, anomaly_fraction, affected_features, shift_sigmas,
                               int(s), segments, phi, name=f"synth-{k:02d}")
            for k, s in enumerate(seeds)]
