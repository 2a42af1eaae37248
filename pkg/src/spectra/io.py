"""Dataset text files, model/spectrum JSON files and CSV plot data."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .errors import SpectraError
from .group_core import bits_to_str
from .spectral_models import (
    Dataset,
    FilterSpec,
    OrderDecay,
    PerFrequency,
    PerOrder,
    SparseModel,
)

FORMAT_VERSION = 1


class ParseError(SpectraError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# -- datasets -----------------------------------------------------------------


def parse_dataset(data: bytes | str) -> Dataset:
    """One bitstring of '0'/'1' per line; '#' comment lines and blank lines skipped."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = data[: exc.start].count(b"\n") + 1
            raise ParseError("not valid UTF-8", line) from None
    else:
        text = data
    rows: list[str] = []
    width = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line.startswith("#") or not line.strip():
            continue
        if set(line) - {"0", "1"}:
            raise ParseError("expected only '0' and '1' characters", lineno)
        if width is None:
            width = len(line)
        elif len(line) != width:
            raise ParseError(f"sample has {len(line)} bits, expected {width}", lineno)
        rows.append(line)
    if not rows:
        raise ParseError("dataset is empty")
    return Dataset.from_strings(rows)


def read_dataset(path: str) -> Dataset:
    with open(path, "rb") as fh:
        return parse_dataset(fh.read())


def format_samples(bits: np.ndarray) -> str:
    """Sample matrix as text, one bitstring per line (coordinate 0 last)."""
    if bits.shape[0] == 0:
        return ""
    chars = np.where(bits[:, ::-1] == 1, "1", "0")
    return "\n".join("".join(row) for row in chars) + "\n"


# -- filters ----------------------------------------------------------------------


def filter_to_json(g: FilterSpec, n: int) -> dict:
    if isinstance(g, OrderDecay):
        return {"type": "order_decay", "theta": g.theta}
    if isinstance(g, PerOrder):
        return {"type": "per_order", "weights": list(g.weights)}
    entries = [[bits_to_str(k, n), v.real, v.imag] for k, v in sorted(g.mapping.items())]
    return {"type": "per_frequency", "entries": entries}


def filter_from_json(obj: dict) -> FilterSpec:
    kind = obj.get("type")
    try:
        if kind == "order_decay":
            return OrderDecay(float(obj["theta"]))
        if kind == "per_order":
            return PerOrder(tuple(float(w) for w in obj["weights"]))
        if kind == "per_frequency":
            return PerFrequency({int(b, 2): complex(float(re), float(im)) for b, re, im in obj["entries"]})
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed filter: {exc!r}") from None
    raise ParseError(f"unknown filter type {kind!r}")


# -- model files --------------------------------------------------------------------


@dataclass
class ModelFile:
    """Persisted model: dense probability table or sparse spectrum entries."""

    n: int
    filter: dict
    dataset_digest: str
    probabilities: np.ndarray | None = None
    band: int | None = None
    spectrum: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def is_dense(self) -> bool:
        return self.probabilities is not None

    def to_json(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "format_version": FORMAT_VERSION,
            "group": {"kind": "boolean", "n": self.n},
            "filter": self.filter,
            "dataset_digest": self.dataset_digest,
            "metadata": self.metadata,
        }
        if self.is_dense:
            obj["kind"] = "dense"
            obj["probabilities"] = [float(v) for v in self.probabilities]
        else:
            obj["kind"] = "sparse"
            obj["band"] = self.band
            obj["spectrum"] = self.spectrum
        return obj

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str | bytes) -> "ModelFile":
        try:
            obj = json.loads(text)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ParseError(f"model file is not JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ParseError("model file must hold a JSON object")
        if obj.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported format_version {obj.get('format_version')!r}")
        try:
            group = obj["group"]
            if not isinstance(group, dict) or group.get("kind") != "boolean":
                raise ParseError("only boolean-group models are supported")
            n = _int_field(group["n"], "group.n")
            if n < 1:
                raise ParseError("group.n must be positive")
            filt = obj["filter"]
            if not isinstance(filt, dict):
                raise ParseError("filter must be an object")
            if filt.get("type") == "amplitude_order_decay":
                # quantum-pipeline models are stored as dense Born tables only
                theta = filt["theta"]
                if obj["kind"] != "dense" or isinstance(theta, bool) or not isinstance(theta, (int, float)) or not 0 <= theta <= 0.5:
                    raise ParseError("malformed amplitude filter")
            else:
                filter_from_json(filt)
            metadata = obj.get("metadata", {})
            if not isinstance(metadata, dict):
                raise ParseError("metadata must be an object")
            common = dict(n=n, filter=filt, dataset_digest=str(obj["dataset_digest"]), metadata=dict(metadata))
            if obj["kind"] == "dense":
                probs = obj["probabilities"]
                if n > 24 or not isinstance(probs, list) or len(probs) != 2**n:
                    raise ParseError("probability table has the wrong size")
                p = np.array(probs, dtype=float)
                if not np.all(np.isfinite(p)):
                    raise ParseError("probability table has non-finite values")
                return cls(probabilities=p, **common)
            if obj["kind"] == "sparse":
                band = _int_field(obj["band"], "band")
                if not 0 <= band <= n:
                    raise ParseError(f"band must lie in [0, {n}]")
                spectrum = obj["spectrum"]
                if not isinstance(spectrum, list):
                    raise ParseError("spectrum must be a list")
                for rec in spectrum:
                    _check_record(rec, n, band)
                if len({rec["frequency"] for rec in spectrum}) != len(spectrum):
                    raise ParseError("duplicate spectrum frequencies")
                return cls(band=band, spectrum=spectrum, **common)
            raise ParseError(f"unknown model kind {obj['kind']!r}")
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError, OverflowError) as exc:
            raise ParseError(f"malformed model file: {exc!r}") from None

    # sparse models ------------------------------------------------------

    @classmethod
    def from_sparse(cls, m: SparseModel, metadata: dict | None = None) -> "ModelFile":
        return cls(
            n=m.n,
            filter=filter_to_json(m.filter, m.n),
            dataset_digest=m.provenance,
            band=m.band,
            spectrum=spectrum_records(m.retained(), m.n),
            metadata=metadata or {},
        )

    def to_sparse(self) -> SparseModel:
        by_order: dict[int, tuple[list, list]] = {m: ([], []) for m in range(self.band + 1)}
        for rec in self.spectrum:
            bits = rec["frequency"]
            support = [self.n - 1 - i for i, c in enumerate(bits) if c == "1"][::-1]
            order = len(support)
            by_order[order][0].append(support)
            by_order[order][1].append(complex(rec["re"], rec["im"]))
        supports, coefs = [], []
        for m in range(self.band + 1):
            sup, c = by_order[m]
            arr = np.array(sup, dtype=np.int64).reshape(len(sup), m)
            arr.setflags(write=False)
            supports.append(arr)
            c = np.array(c, dtype=complex)
            if np.all(c.imag == 0):
                c = c.real.copy()
            coefs.append(c)
        return SparseModel(self.n, self.band, filter_from_json(self.filter), tuple(supports), tuple(coefs), self.dataset_digest)


def _int_field(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{name} must be an integer")
    return v


def _check_record(rec, n: int, band: int) -> None:
    if not isinstance(rec, dict):
        raise ParseError("spectrum records must be objects")
    bits = rec["frequency"]
    if not isinstance(bits, str) or len(bits) != n or set(bits) - {"0", "1"}:
        raise ParseError("spectrum frequency must be an n-character bitstring")
    if bits.count("1") > band:
        raise ParseError("spectrum entry beyond the band")
    for key in ("re", "im"):
        v = rec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ParseError(f"spectrum {key} must be a finite number")


def spectrum_records(entries, n: int) -> list[dict]:
    """``(frequency, value)`` pairs -> records sorted by (order, frequency)."""
    recs = []
    for k, v in entries:
        k = int(k)
        v = complex(v)
        recs.append({"frequency": bits_to_str(k, n), "re": v.real, "im": v.imag, "order": k.bit_count()})
    recs.sort(key=lambda r: (r["order"], r["frequency"]))
    return recs


def spectrum_file(entries, n: int) -> str:
    obj = {
        "format_version": FORMAT_VERSION,
        "group": {"kind": "boolean", "n": n},
        "records": spectrum_records(entries, n),
    }
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def default_metadata(command: str, **extra) -> dict:
    meta = {"tool": "spectra", "version": __version__, "command": command}
    meta.update(extra)
    return meta


# -- csv -------------------------------------------------------------------------------


def write_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
