"""Run configuration: INI-style files with sections, overridable from flags.

Every accepted key and its default is listed in ``DEFAULTS``; anything else
is rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .detectors import KINDS, DetectorSpec, TrainingConfig
from .ensemble import METHODS, THRESHOLD_MODES, EnsembleConfig
from .errors import ValidationError
from .experiment import MODES, ExperimentConfig


def _floats(text):
    return tuple(_fraction(t) for t in _words(text))


def _fraction(token: str) -> float:
    # accepts "0.25" or "1/3"
    if "/" in token:
        num, den = token.split("/", 1)
        return float(num) / float(den)
    return float(token)


def _words(text):
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


def _ints_or_none(text):
    words = _words(text)
    return None if not words or words == ("auto",) else tuple(int(w) for w in words)


def _int_or_none(text):
    text = str(text).strip()
    return None if text in ("", "auto") else int(text)


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (parser, default)
DEFAULTS = {
    "ensemble": {
        "method": (str, "fbr"),
        "members": (int, 17),
        "partitions": (int, 2),
        "subsample": (float, 0.75),
        "window": (int, 32),
        "train_stride": (int, 1),
        "threshold_mode": (str, "paper_iqr"),
        "detectors": (_words, ("dense_autoencoder",)),
    },
    "training": {
        "epochs": (int, 50),
        "batch_size": (int, 32),
        "learning_rate": (float, 1e-3),
        "adam_beta1": (float, 0.9),
        "adam_beta2": (float, 0.999),
        "adam_eps": (float, 1e-8),
    },
    "dense_autoencoder": {
        "hidden": (_ints_or_none, None),
        "activation": (str, "tanh"),
    },
    "lstm_forecaster": {"hidden": (int, 32)},
    "linear_pca": {"components": (_int_or_none, None)},
    "stacking": {
        "detectors": (_words, KINDS),
        "members_per_kind": (int, 12),
        "l2": (float, 1e-3),
        "max_iter": (int, 20000),
        "tol": (float, 1e-6),
    },
    "split": {
        "fractions": (_floats, (0.5, 0.5)),
        "stacked_fractions": (_floats, (1 / 3, 1 / 3, 1 / 3)),
    },
    "data": {
        "input": (_words, ()),
        "delimiter": (str, ";"),
        "label_col": (str, "anomaly"),
    },
    "synth": {
        "enabled": (_bool, False),
        "count": (int, 5),
        "n": (int, 2000),
        "d": (int, 8),
        "anomaly_fraction": (float, 0.05),
        "affected_features": (int, 2),
        "shift_sigmas": (float, 5.0),
        "segments": (int, 3),
    },
    "run": {
        "modes": (_words, ("plain", "fb", "fbr")),
        "threads": (int, 1),
        "output": (str, "."),
        "report_formats": (_words, ("json", "csv")),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings, ``values[section][key]``, plus the root seed."""

    values: dict
    seed: int | None = None

    def __getitem__(self, section):
        return self.values[section]

    def detector_spec(self, kind: str) -> DetectorSpec:
        hp = {k: v for k, v in self.values[kind].items()}
        if kind == "dense_autoencoder" and hp["hidden"] is not None:
            hp["hidden"] = list(hp["hidden"])
        return DetectorSpec(kind, hp)

    def training(self) -> TrainingConfig:
        return TrainingConfig(seed=self.seed or 0, **self.values["training"])

    def ensemble(self) -> EnsembleConfig:
        e = self.values["ensemble"]
        method = "fbr" if e["method"] == "stacked" else e["method"]
        return EnsembleConfig(
            M=1 if method == "plain" else e["members"],
            K=e["partitions"], subsample_fraction=e["subsample"], method=method,
            detector_specs=tuple(self.detector_spec(k) for k in e["detectors"]),
            threshold_mode=e["threshold_mode"], W=e["window"], seed=self.seed or 0,
            train_stride=e["train_stride"], training=self.training())

    def experiment(self) -> ExperimentConfig:
        s = self.values["stacking"]
        return ExperimentConfig(
            ensemble=replace(self.ensemble(), M=self.values["ensemble"]["members"]),
            split=self.values["split"]["fractions"],
            stacked_split=self.values["split"]["stacked_fractions"],
            stacked_specs=tuple(self.detector_spec(k) for k in s["detectors"]),
            stacked_members_per_kind=s["members_per_kind"], l2=s["l2"],
            max_iter=s["max_iter"], tol=s["tol"])

    def to_dict(self) -> dict:
        return {"seed": self.seed,
                "values": {sec: {k: list(v) if isinstance(v, tuple) else v
                                 for k, v in keys.items()} for sec, keys in self.values.items()}}


def _validate(values: dict) -> None:
    problems = []
    e = values["ensemble"]
    if e["method"] not in (*METHODS, "stacked"):
        problems.append(f"ensemble.method={e['method']!r}")
    if e["threshold_mode"] not in THRESHOLD_MODES:
        problems.append(f"ensemble.threshold_mode={e['threshold_mode']!r}")
    for sec in ("ensemble", "stacking"):
        bad = [k for k in values[sec]["detectors"] if k not in KINDS]
        if bad or not values[sec]["detectors"]:
            problems.append(f"{sec}.detectors={list(values[sec]['detectors'])!r}")
    for key in ("members", "partitions", "window", "train_stride"):
        if e[key] < 1:
            problems.append(f"ensemble.{key}={e[key]}")
    if not 0 < e["subsample"] <= 1:
        problems.append(f"ensemble.subsample={e['subsample']}")
    bad_modes = [m for m in values["run"]["modes"] if m not in MODES]
    if bad_modes or not values["run"]["modes"]:
        problems.append(f"run.modes={list(values['run']['modes'])!r}")
    if values["run"]["threads"] < 1:
        problems.append(f"run.threads={values['run']['threads']}")
    bad_fmt = [f for f in values["run"]["report_formats"] if f not in ("json", "csv")]
    if bad_fmt:
        problems.append(f"run.report_formats={list(values['run']['report_formats'])!r}")
    if problems:
        raise ValidationError("invalid configuration: " + "; ".join(problems))


def load_config(path=None, overrides: dict | None = None, seed: int | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (``"section.key"`` -> value)."""
    values = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in DEFAULTS.items()}
    raw: dict[str, dict] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with Path(path).open(encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ValidationError(f"cannot parse config {path}: {exc}") from exc
        raw = {sec: dict(parser[sec]) for sec in parser.sections()}
    for dotted, value in (overrides or {}).items():
        sec, key = dotted.split(".", 1)
        raw.setdefault(sec, {})[key] = value

    unknown = [f"{sec}.{k}" for sec, keys in raw.items() for k in keys
               if sec not in DEFAULTS or k not in DEFAULTS[sec]]
    unknown += [sec for sec, keys in raw.items() if sec not in DEFAULTS and not keys]
    if unknown:
        raise ValidationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    bad = []
    for sec, keys in raw.items():
        for k, v in keys.items():
            conv = DEFAULTS[sec][k][0]
            try:
                values[sec][k] = conv(v) if isinstance(v, str) else v
            except (TypeError, ValueError):
                bad.append(f"{sec}.{k}={v!r}")
    if bad:
        raise ValidationError(f"invalid configuration values: {', '.join(bad)}")
    _validate(values)
    return RunConfig(values, seed)


def describe_defaults() -> str:
    lines = []
    for sec, keys in DEFAULTS.items():
        lines.append(f"[{sec}]")
        for k, (_, default) in keys.items():
            shown = ",".join(map(str, default)) if isinstance(default, tuple) else default
            lines.append(f"  {k} = {'auto' if shown is None else shown}")
    return "\n".join(lines)
