"""Versioned, self-describing model files (``.helios``).

A model file is canonical JSON (sorted keys, compact separators, trailing
newline) of the form::

    {"checksum": "sha256:<hex of canonical payload>",
     "format": "helios-model", "kind": "bnn" | "markov" | "climatology",
     "payload": {...}, "version": 1}

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every stored parameter bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from helios.bnn import BnnModel
from helios.predictors import ClimatologyProfile, MarkovModel

FORMAT = "helios-model"
VERSION = 1
SUFFIX = ".helios"

_KINDS = {"bnn": BnnModel, "markov": MarkovModel, "climatology": ClimatologyProfile}


class ModelFileError(ValueError):
    pass


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _kind_of(model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"cannot store objects of type {type(model).__name__}")


def dumps(model) -> str:
    payload = model.to_payload()
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": _kind_of(model),
        "checksum": "sha256:" + hashlib.sha256(_canonical(payload).encode()).hexdigest(),
        "payload": payload,
    }
    return _canonical(doc) + "\n"


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"not a model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFileError("missing or wrong format tag")
    if "version" not in doc:
        raise ModelFileError("missing schema version")
    if doc["version"] != VERSION:
        raise ModelFileError(f"unsupported schema version {doc['version']!r} (expected {VERSION})")
    kind = doc.get("kind")
    if kind not in _KINDS:
        raise ModelFileError(f"unknown model kind {kind!r}")
    payload = doc.get("payload")
    digest = "sha256:" + hashlib.sha256(_canonical(payload).encode()).hexdigest()
    if doc.get("checksum") != digest:
        raise ModelFileError("checksum mismatch")
    try:
        return _KINDS[kind].from_payload(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed {kind} payload: {exc}") from None


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(model), encoding="utf-8")
    return path


def load_model(path, expected_kind: str | None = None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFileError(f"{path}: {exc.strerror}") from None
    try:
        model = loads(text)
    except ModelFileError as exc:
        raise ModelFileError(f"{path}: {exc}") from None
    if expected_kind is not None and _kind_of(model) != expected_kind:
        raise ModelFileError(f"{path}: expected a {expected_kind} model, found {_kind_of(model)}")
    return model
