"""File formats: streams, classifier weights, step traces, run manifests.

The canonical stream format is JSON Lines, one record object per line with
fields ``{"t", "feature", "logits"|"probs", "label"?, "meta"?}``. Files
written by this package start with a single header object carrying
``format_version``; readers accept files without a header so hand-made
fixtures stay cheap. A CSV alternative with header row
``t,label,f0..f{d-1},l0..l{K-1}`` is accepted for logit streams.

All readers are lazy single-pass generators: memory stays bounded by one
record regardless of file size. All floats are serialized with Python's
shortest round-trip representation, so write -> read -> write is
byte-stable.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    IncompatibleVersionError,
    ParseError,
    StreamContractError,
    ValidationError,
)

FORMAT_VERSION = "1.0.0"

#: Tolerance for declared probability rows: |sum - 1| beyond this is rejected.
PROB_SUM_TOL = 1e-4


@dataclass(frozen=True)
class StreamRecord:
    """One timestep of an activity stream.

    Exactly one of ``logits`` / ``probs`` is set; ``kind`` reports which.
    ``label`` is the optional ground-truth class used for evaluation only;
    no adaptation path may read it.
    """

    index: int
    feature: np.ndarray
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None
    label: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if (self.logits is None) == (self.probs is None):
            raise StreamContractError(
                f"record {self.index}: exactly one of logits/probs must be present"
            )

    @property
    def kind(self) -> str:
        return "logits" if self.logits is not None else "probs"

    @property
    def scores(self) -> np.ndarray:
        arr = self.logits if self.logits is not None else self.probs
        assert arr is not None
        return arr


def check_version(version: Any, where: str) -> None:
    """Reject format versions whose major differs from ours."""
    if not isinstance(version, str) or not version:
        raise FormatError(f"{where}: format_version must be a non-empty string")
    major = version.split(".", 1)[0]
    ours = FORMAT_VERSION.split(".", 1)[0]
    if major != ours:
        raise IncompatibleVersionError(
            f"{where}: format_version {version} is not compatible with {FORMAT_VERSION}"
        )


def _finite_floats(raw: Any, what: str, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"{where}: {what} must be a non-empty array")
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {what} is not numeric: {exc}") from None
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{where}: {what} must be a flat array of finite reals")
    return arr


def _record_from_obj(obj: dict, where: str) -> StreamRecord:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected a JSON object")
    if "t" not in obj or isinstance(obj["t"], bool) or not isinstance(obj["t"], int):
        raise ValidationError(f"{where}: field 't' must be an integer")
    feature = _finite_floats(obj.get("feature"), "feature", where)
    has_logits = "logits" in obj
    has_probs = "probs" in obj
    if has_logits == has_probs:
        raise StreamContractError(
            f"{where}: exactly one of 'logits'/'probs' must be present"
        )
    if has_logits:
        scores = _finite_floats(obj["logits"], "logits", where)
        logits, probs = scores, None
    else:
        scores = _finite_floats(obj["probs"], "probs", where)
        if np.any(scores < 0.0):
            raise ValidationError(f"{where}: probs must be non-negative")
        if abs(float(scores.sum()) - 1.0) > PROB_SUM_TOL:
            raise ValidationError(
                f"{where}: probs sum to {scores.sum():.6f}, off the simplex "
                f"beyond {PROB_SUM_TOL}"
            )
        logits, probs = None, scores
    label = obj.get("label")
    if label is not None and (isinstance(label, bool) or not isinstance(label, int)):
        raise ValidationError(f"{where}: label must be an integer or null")
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise ValidationError(f"{where}: meta must be an object")
    return StreamRecord(
        index=obj["t"], feature=feature, logits=logits, probs=probs,
        label=label, meta=meta,
    )


def _iter_jsonl_stream(path: str, declared_kind: str | None) -> Iterator[StreamRecord]:
    dims: tuple[int, int] | None = None
    kind = declared_kind
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if isinstance(obj, dict) and "t" not in obj and "format_version" in obj:
                check_version(obj["format_version"], f"{path}: line {lineno}")
                declared = obj.get("payload")
                if declared is not None:
                    if declared not in ("logits", "probs"):
                        raise FormatError(
                            f"{path}: line {lineno}: unknown payload kind {declared!r}"
                        )
                    if kind is None:
                        kind = declared
                    elif kind != declared:
                        raise StreamContractError(
                            f"{path}: header declares {declared}, caller expects {kind}"
                        )
                continue
            rec = _record_from_obj(obj, f"{path}: line {lineno}")
            if kind is None:
                kind = rec.kind
            elif rec.kind != kind:
                raise StreamContractError(
                    f"{path}: line {lineno}: record carries {rec.kind}, "
                    f"stream is declared {kind}"
                )
            if dims is None:
                dims = (rec.feature.size, rec.scores.size)
            elif (rec.feature.size, rec.scores.size) != dims:
                raise StreamContractError(
                    f"{path}: line {lineno}: dimensions "
                    f"({rec.feature.size}, {rec.scores.size}) drift from "
                    f"first record {dims}"
                )
            yield rec


def _iter_csv_stream(path: str, declared_kind: str | None) -> Iterator[StreamRecord]:
    if declared_kind not in (None, "logits"):
        raise StreamContractError(f"{path}: CSV streams carry logits only")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return
        n_feat = sum(1 for h in header if h.startswith("f") and h[1:].isdigit())
        n_log = sum(1 for h in header if h.startswith("l") and h[1:].isdigit())
        expected = ["t", "label"] + [f"f{i}" for i in range(n_feat)] + [
            f"l{i}" for i in range(n_log)
        ]
        if header != expected or n_feat == 0 or n_log == 0:
            raise FormatError(
                f"{path}: CSV header must be t,label,f0..f{{d-1}},l0..l{{K-1}}, "
                f"got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(expected)} fields, "
                    f"got {len(row)}"
                )
            try:
                t = int(row[0])
                label = int(row[1]) if row[1] != "" else None
                feature = np.array([float(x) for x in row[2 : 2 + n_feat]])
                logits = np.array([float(x) for x in row[2 + n_feat :]])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if not (np.all(np.isfinite(feature)) and np.all(np.isfinite(logits))):
                raise ValidationError(f"{path}: line {lineno}: non-finite value")
            yield StreamRecord(index=t, feature=feature, logits=logits, label=label)


def read_stream(path: str, declared_kind: str | None = None) -> Iterator[StreamRecord]:
    """Lazily read a stream file (JSON Lines, or CSV by ``.csv`` extension).

    Args:
        path: stream file location.
        declared_kind: ``"logits"`` or ``"probs"`` to enforce the payload
            kind; ``None`` infers it from the header or first record.

    Yields:
        StreamRecord per data line, in file order.

    Raises:
        ParseError: malformed line (message names the line number).
        StreamContractError: payload-kind or dimension drift mid-stream.
        ValidationError: non-finite values or off-simplex probability rows.
    """
    if declared_kind not in (None, "logits", "probs"):
        raise StreamContractError(f"unknown payload kind {declared_kind!r}")
    if path.endswith(".csv"):
        return _iter_csv_stream(path, declared_kind)
    return _iter_jsonl_stream(path, declared_kind)


def _float_list(arr: np.ndarray) -> list[float]:
    return [float(x) for x in arr]


def write_stream(path: str, records: Iterable[StreamRecord], kind: str | None = None) -> int:
    """Write records as JSON Lines with a version header. Returns the count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        header: dict[str, Any] = {"format_version": FORMAT_VERSION, "kind": "stream"}
        if kind is not None:
            header["payload"] = kind
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            obj: dict[str, Any] = {"t": rec.index, "feature": _float_list(rec.feature)}
            if rec.logits is not None:
                obj["logits"] = _float_list(rec.logits)
            else:
                obj["probs"] = _float_list(rec.probs)
            if rec.label is not None:
                obj["label"] = int(rec.label)
            if rec.meta:
                obj["meta"] = rec.meta
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
            n += 1
    return n


def read_classifier_weights(path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a planted or exported linear head.

    JSON object ``{"weights": K x d array, "bias": K array?}`` or a CSV of
    K weight rows. Returns ``(weights, bias-or-None)`` as float64.
    """
    if path.endswith(".csv"):
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
        try:
            w = np.array([[float(x) for x in row] for row in rows])
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
        bias = None
    else:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}") from None
        if not isinstance(obj, dict) or "weights" not in obj:
            raise FormatError(f"{path}: expected an object with a 'weights' field")
        if "format_version" in obj:
            check_version(obj["format_version"], path)
        try:
            w = np.asarray(obj["weights"], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: ragged or non-numeric weights: {exc}") from None
        bias = None
        if obj.get("bias") is not None:
            bias = np.asarray(obj["bias"], dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 1:
        raise DimensionError(
            f"{path}: weights must be a K x d matrix with K >= 2, got shape {w.shape}"
        )
    if not np.all(np.isfinite(w)):
        raise ValidationError(f"{path}: weights contain non-finite values")
    if bias is not None:
        if bias.shape != (w.shape[0],):
            raise DimensionError(
                f"{path}: bias shape {bias.shape} does not match K={w.shape[0]}"
            )
        if not np.all(np.isfinite(bias)):
            raise ValidationError(f"{path}: bias contains non-finite values")
    return w, bias


def write_classifier_weights(path: str, weights: np.ndarray, bias: np.ndarray | None = None) -> None:
    obj: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "weights": [[float(x) for x in row] for row in np.asarray(weights)],
    }
    if bias is not None:
        obj["bias"] = [float(x) for x in np.asarray(bias)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


# Trace files -----------------------------------------------------------

_TRACE_VECTOR_FIELDS = (
    "expected_state",
    "routing",
    "calibrated_prior",
    "temporal_prior",
    "refined",
)
_TRACE_SCALAR_FIELDS = ("discrepancy", "surprise")


def write_trace(path: str, traces: Iterable[Any]) -> int:
    """Serialize step traces as JSON Lines (header line first).

    An empty trace list produces a file holding only the header. Floats
    use shortest round-trip formatting, so ``read_trace`` recovers them
    bit-exactly.
    """
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps({"format_version": FORMAT_VERSION, "kind": "trace"}, sort_keys=True)
            + "\n"
        )
        for tr in traces:
            obj: dict[str, Any] = {"t": tr.t, "annihilated": bool(tr.annihilated)}
            for name in _TRACE_SCALAR_FIELDS:
                obj[name] = float(getattr(tr, name))
            for name in _TRACE_VECTOR_FIELDS:
                obj[name] = _float_list(getattr(tr, name))
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
            n += 1
    return n


def read_trace(path: str) -> list:
    """Read a trace file back into StepTrace objects (list, file order)."""
    from .adapter import StepTrace

    out: list = []
    saw_header = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if isinstance(obj, dict) and "t" not in obj and "format_version" in obj:
                check_version(obj["format_version"], f"{path}: line {lineno}")
                saw_header = True
                continue
            if not isinstance(obj, dict):
                raise ParseError(f"{path}: line {lineno}: expected a JSON object")
            try:
                kwargs: dict[str, Any] = {
                    "t": int(obj["t"]),
                    "annihilated": bool(obj["annihilated"]),
                }
                for name in _TRACE_SCALAR_FIELDS:
                    kwargs[name] = float(obj[name])
                for name in _TRACE_VECTOR_FIELDS:
                    kwargs[name] = _finite_floats(
                        obj[name], name, f"{path}: line {lineno}"
                    )
            except KeyError as exc:
                raise ParseError(
                    f"{path}: line {lineno}: missing trace field {exc}"
                ) from None
            out.append(StepTrace(**kwargs))
    if not saw_header and out:
        raise FormatError(f"{path}: trace file lacks a format_version header")
    return out


# Run manifests ---------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    """Provenance for one CLI invocation: inputs, config, output digests."""

    command: str
    created_utc: str
    config: dict[str, Any]
    inputs: dict[str, dict[str, Any]]
    outputs: dict[str, dict[str, Any]]
    format_version: str = FORMAT_VERSION


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def file_entry(path: str) -> dict[str, Any]:
    return {"path": os.path.basename(path), "sha256": sha256_file(path)}


def write_manifest(path: str, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(manifest), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_manifest(path: str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    try:
        check_version(obj["format_version"], path)
        return RunManifest(
            command=obj["command"],
            created_utc=obj["created_utc"],
            config=obj["config"],
            inputs=obj["inputs"],
            outputs=obj["outputs"],
            format_version=obj["format_version"],
        )
    except KeyError as exc:
        raise FormatError(f"{path}: manifest missing field {exc}") from None


def verify_manifest(path: str) -> list[str]:
    """Recompute output digests; return the names that no longer match."""
    manifest = read_manifest(path)
    base = os.path.dirname(os.path.abspath(path))
    stale = []
    for name, entry in sorted(manifest.outputs.items()):
        target = os.path.join(base, entry["path"])
        if not os.path.exists(target) or sha256_file(target) != entry["sha256"]:
            stale.append(name)
    return stale
