"""Command line: ``fbrad {synth,train,score,eval,gradcheck}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import describe_defaults, load_config
from .data import TimeSeries, load_skab_csv
from .detectors import DetectorSpec, gradient_check
from .ensemble import fit_ensemble, split_ab
from .errors import DataError, FbradError, NumericalError, UsageError
from .experiment import run_experiment, synthetic_corpus
from .persistence import EnsembleModel, load_model, save_model
from .stacking import fit_stacked

log = logging.getLogger("fbrad")

IO_EXIT = 6
GRADCHECK_TOLERANCE = 1e-4

# flag dest -> config key it overrides
_FLAG_KEYS = {
    "method": "ensemble.method",
    "members": "ensemble.members",
    "partitions": "ensemble.partitions",
    "subsample": "ensemble.subsample",
    "window": "ensemble.window",
    "threshold_mode": "ensemble.threshold_mode",
    "label_col": "data.label_col",
    "delimiter": "data.delimiter",
    "threads": "run.threads",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p, seed_required: bool):
    p.add_argument("--config", help="INI-style config file; flags override its values")
    p.add_argument("--seed", type=int, required=seed_required, help="root random seed")
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    p.add_argument("--input", nargs="+", help="input CSV file(s) or directories")
    p.add_argument("--output", help="output path")
    p.add_argument("--label-col", dest="label_col", help="label column name (default: anomaly)")
    p.add_argument("--delimiter", help="CSV delimiter (default: ';')")
    p.add_argument("-v", "--verbose", action="store_true")


def _ensemble_flags(p):
    p.add_argument("--method", choices=["plain", "fb", "fbr", "stacked"])
    p.add_argument("--members", type=int, help="ensemble size M")
    p.add_argument("--partitions", type=int, help="partitions K per member")
    p.add_argument("--subsample", type=float, help="row fraction for each partition's PCA")
    p.add_argument("--window", type=int, help="window length W")
    p.add_argument("--threshold-mode", dest="threshold_mode", choices=["paper_iqr", "tukey"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fbrad", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter,
                     epilog="configuration keys and defaults:\n" + describe_defaults())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic labeled corpus as SKAB-style CSVs")
    _common(p, seed_required=False)
    p.add_argument("--count", type=int, help="number of series")
    p.add_argument("--n", type=int, help="points per series")
    p.add_argument("--d", type=int, help="features per series")

    p = sub.add_parser("train", help="fit a plain/fb/fbr/stacked model on one series")
    _common(p, seed_required=True)
    _ensemble_flags(p)

    p = sub.add_parser("score", help="score a series with a saved model")
    _common(p, seed_required=False)
    p.add_argument("--model", required=True, help="model file written by 'train'")

    p = sub.add_parser("eval", help="run the split/fit/score protocol over a corpus")
    _common(p, seed_required=True)
    _ensemble_flags(p)
    p.add_argument("--modes", help="comma-separated subset of plain,fb,fbr,stacked")

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _overrides(args) -> dict:
    out = {}
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            out[key] = str(value)
    if getattr(args, "modes", None):
        out["run.modes"] = args.modes
    elif getattr(args, "method", None) and args.command == "eval":
        out["run.modes"] = args.method
    if getattr(args, "input", None):
        out["data.input"] = ",".join(args.input)
    if getattr(args, "output", None):
        out["run.output"] = args.output
    for key in ("count", "n", "d"):
        if getattr(args, key, None) is not None:
            out[f"synth.{key}"] = str(getattr(args, key))
    return out


def _csv_files(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    if not files:
        raise DataError("no input CSV files found")
    return files


def _load_corpus(cfg, require_labels=True) -> list[TimeSeries]:
    data = cfg["data"]
    return [load_skab_csv(f, data["delimiter"], data["label_col"], require_labels=require_labels)
            for f in _csv_files(data["input"])]


def write_series_csv(series: TimeSeries, path, delimiter=";") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["datetime", *series.feature_names, "anomaly"])
        stamps = _format_timestamps(series.timestamps)
        for t, row, label in zip(stamps, series.values, series.labels):
            w.writerow([t, *map(repr, row.tolist()), int(label)])


def _format_timestamps(ts) -> list[str]:
    if np.issubdtype(ts.dtype, np.datetime64):
        return [s.replace("T", " ") for s in np.datetime_as_string(ts, unit="s")]
    return [repr(float(t)) for t in ts]


def cmd_synth(args, cfg) -> None:
    s = cfg["synth"]
    out = Path(cfg["run"]["output"])
    out.mkdir(parents=True, exist_ok=True)
    corpus = synthetic_corpus(s["count"], s["n"], s["d"], s["anomaly_fraction"],
                              s["affected_features"], s["shift_sigmas"], args.seed or 0,
                              s["segments"])
    for series in corpus:
        write_series_csv(series, out / f"{series.name}.csv", cfg["data"]["delimiter"])
    print(f"wrote {len(corpus)} series to {out}")


def cmd_train(args, cfg) -> None:
    if not cfg["data"]["input"]:
        raise UsageError("train needs --input")
    if args.output is None:
        raise UsageError("train needs --output (model file path)")
    method = cfg["ensemble"]["method"]
    series = _load_corpus(cfg, require_labels=method == "stacked")
    if len(series) != 1:
        raise UsageError("train takes exactly one input series")
    series = series[0]
    threads = cfg["run"]["threads"]
    if method == "stacked":
        exp = cfg.experiment()
        ens = replace(exp.ensemble, method="fbr", detector_specs=exp.stacked_specs,
                      M=exp.stacked_members_per_kind * len(exp.stacked_specs))
        part_a, part_b = split_ab(series.n, ens.W)
        members = fit_ensemble(series.values[part_a.start:part_a.stop], ens, threads=threads)
        labels = series.labels[part_b.start:part_b.stop]
        stacking = fit_stacked(members, series.values[part_b.start:part_b.stop], labels,
                               exp.l2, exp.max_iter, exp.tol)
        model = EnsembleModel("stacked", tuple(members), stacking, cfg.to_dict())
    else:
        members = fit_ensemble(series.values, cfg.ensemble(), threads=threads)
        model = EnsembleModel(method, tuple(members), None, cfg.to_dict())
    save_model(model, args.output)
    print(f"saved {method} model with {len(model.members)} members to {args.output}")


def cmd_score(args, cfg) -> None:
    if not cfg["data"]["input"]:
        raise UsageError("score needs --input")
    model = load_model(args.model)
    series = _load_corpus(cfg, require_labels=False)
    if len(series) != 1:
        raise UsageError("score takes exactly one input series")
    series = series[0]
    score, binary = model.score(series.values)
    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["timestamp", "score", "binary"])
        for t, s, b in zip(_format_timestamps(series.timestamps), score, binary):
            w.writerow([t, repr(float(s)), int(b)])
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_eval(args, cfg) -> None:
    s = cfg["synth"]
    if cfg["data"]["input"]:
        corpus = _load_corpus(cfg)
    elif s["enabled"]:
        corpus = synthetic_corpus(s["count"], s["n"], s["d"], s["anomaly_fraction"],
                                  s["affected_features"], s["shift_sigmas"], args.seed,
                                  s["segments"])
    else:
        raise UsageError("eval needs --input or an enabled [synth] section")
    report = run_experiment(corpus, cfg.experiment(), cfg["run"]["modes"], cfg["run"]["threads"])
    run = cfg.to_dict()
    # thread count cannot change results, so it stays out of the report
    del run["values"]["run"]["threads"]
    report = type(report)(report.per_series, report.macro,
                          {"run": run, "experiment": report.config}, report.seed)
    out = Path(cfg["run"]["output"])
    out.mkdir(parents=True, exist_ok=True)
    if "json" in cfg["run"]["report_formats"]:
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    if "csv" in cfg["run"]["report_formats"]:
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    for method, vals in report.macro.items():
        print(f"{method:>13}  F1 {vals['f1']:.4f}  AUC {vals['auc']:.4f}")


def gradcheck_fixtures(seed: int = 0) -> dict[str, float]:
    """Max relative gradient error for the two gradient-trained detector kinds."""
    rng = np.random.default_rng(seed)
    dense = gradient_check(DetectorSpec("dense_autoencoder", {"hidden": [3]}),
                           rng.standard_normal((5, 3, 2)), seed=seed)
    lstm = gradient_check(DetectorSpec("lstm_forecaster", {"hidden": 4}),
                          rng.standard_normal((4, 5, 2)), seed=seed)
    return {"dense_autoencoder 6-3-6": dense, "lstm_forecaster h=4 W=5": lstm}


def cmd_gradcheck(args, cfg) -> None:
    results = gradcheck_fixtures(args.seed)
    for name, err in results.items():
        print(f"{name:<26} max relative error {err:.3e}")
    worst = max(results.values())
    if worst > GRADCHECK_TOLERANCE:
        raise NumericalError(f"gradient check failed: {worst:.3e} > {GRADCHECK_TOLERANCE}")


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "score": cmd_score,
            "eval": cmd_eval, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = None
        if args.command != "gradcheck":
            cfg = load_config(args.config, _overrides(args), args.seed)
        COMMANDS[args.command](args, cfg)
    except FbradError as exc:
        print(f"fbrad: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fbrad: I/O error: {exc}", file=sys.stderr)
        return IO_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
