"""Versioned, checksummed model files.

Layout (little endian)::

    magic      4 bytes   b"FBRM"
    version    u16
    length     u64       payload byte count
    payload    JSON, UTF-8; arrays stored as base64 of their raw float64 bytes
    checksum   32 bytes  SHA-256 of everything before it

JSON floats are written with ``repr`` and arrays as raw bytes, so a model
reloads bit-exactly.
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Standardizer
from .detectors import LAYOUT_VERSION, DetectorSpec, TrainedDetector
from .ensemble import EnsembleMember, ensemble_output
from .errors import CompatibilityError, CorruptionError
from .linalg import NestedRotation
from .stacking import StackedModel, predict_stacked

MAGIC = b"FBRM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQ")
_DIGEST = 32


@dataclass(frozen=True)
class EnsembleModel:
    """A trained plain/fb/fbr ensemble, or a stacked one when ``stacking`` is set."""

    method: str
    members: tuple[EnsembleMember, ...]
    stacking: StackedModel | None = None
    config: dict = field(default_factory=dict)

    def score(self, data) -> tuple[np.ndarray, np.ndarray]:
        if self.stacking is not None:
            return predict_stacked(self.stacking, data)
        return ensemble_output(self.members, data)


def _enc(a) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(obj) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).astype(np.float64)


def _member_to_dict(m: EnsembleMember) -> dict:
    det = m.detector
    return {
        "feature_subset": list(m.feature_subset),
        "partition_layout": [list(g) for g in m.rotation.partition_layout],
        "blocks": [_enc(b) for b in m.rotation.blocks],
        "assembled": _enc(m.rotation.assembled),
        "threshold": m.threshold,
        "means": _enc(m.standardizer.means),
        "stds": _enc(m.standardizer.stds),
        "detector": {
            "kind": det.spec.kind,
            "spec": det.spec.hyperparameters,
            "hyperparameters": det.hyperparameters,
            "input_dim": det.input_dim,
            "window_length": det.window_length,
            "layout_version": det.layout_version,
            "weights": _enc(det.weights),
        },
    }


def _member_from_dict(d: dict) -> EnsembleMember:
    det = d["detector"]
    if det["layout_version"] != LAYOUT_VERSION:
        raise CompatibilityError(f"detector layout version {det['layout_version']} is unsupported")
    detector = TrainedDetector(DetectorSpec(det["kind"], det["spec"]), _dec(det["weights"]),
                               det["input_dim"], det["window_length"], det["hyperparameters"],
                               det["layout_version"])
    rotation = NestedRotation(tuple(tuple(g) for g in d["partition_layout"]),
                              tuple(_dec(b) for b in d["blocks"]), _dec(d["assembled"]))
    return EnsembleMember(tuple(d["feature_subset"]), rotation, detector, float(d["threshold"]),
                          Standardizer(_dec(d["means"]), _dec(d["stds"])))


def to_bytes(model: EnsembleModel) -> bytes:
    doc = {
        "method": model.method,
        "config": model.config,
        "members": [_member_to_dict(m) for m in model.members],
        "stacking": None,
    }
    if model.stacking is not None:
        st = model.stacking
        doc["stacking"] = {"weights": _enc(st.weights), "bias": st.bias,
                           "means": _enc(st.score_standardizer.means),
                           "stds": _enc(st.score_standardizer.stds)}
    payload = json.dumps(doc, sort_keys=True).encode("utf-8")
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, len(payload)) + payload
    return head + hashlib.sha256(head).digest()


def from_bytes(blob: bytes) -> EnsembleModel:
    if len(blob) < _HEADER.size + _DIGEST:
        raise CorruptionError("model file is truncated")
    magic, version, length = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptionError("not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise CompatibilityError(f"model format version {version}; this build reads {FORMAT_VERSION}")
    if len(blob) != _HEADER.size + length + _DIGEST:
        raise CorruptionError("model file length does not match its header")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptionError("model file checksum mismatch")
    try:
        doc = json.loads(body[_HEADER.size:].decode("utf-8"))
        members = tuple(_member_from_dict(m) for m in doc["members"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptionError(f"model file content invalid: {exc}") from exc
    stacking = None
    if doc["stacking"] is not None:
        st = doc["stacking"]
        stacking = StackedModel(members, _dec(st["weights"]), float(st["bias"]),
                                Standardizer(_dec(st["means"]), _dec(st["stds"])))
    return EnsembleModel(doc["method"], members, stacking, doc["config"])


def save_model(model: EnsembleModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_model(path) -> EnsembleModel:
    return from_bytes(Path(path).read_bytes())
