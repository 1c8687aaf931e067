"""JSON operator exchange, 17-digit JSON output and atomic file writes."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .families import DiagonalSeq, Tail
from .linalg import as_matrix, structure_flag

SCHEMA = 1


class ExchangeError(ValueError):
    """Malformed operator-exchange file."""


def _float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    # keep floats recognisable as floats on reload
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps17(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written at 17 significant digits.

    Dict keys keep insertion order, so equal inputs give equal bytes.
    """
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps17(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [dumps17(v, indent, _level + 1) for v in obj]
        if all(not isinstance(_plain(v), (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# operator files


@dataclass
class OperatorFile:
    matrix: np.ndarray
    family: str | None = None
    params: dict = field(default_factory=dict)
    tail: Tail | None = None
    constants: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> DiagonalSeq:
        return DiagonalSeq(np.imag(np.diag(self.matrix)).copy(), self.tail or Tail("unknown"))

    def to_dict(self) -> dict:
        A = self.matrix
        return {
            "schema": SCHEMA,
            "dim": int(A.shape[0]),
            "structure_flag": structure_flag(A),
            "family": self.family,
            "params": self.params,
            "tail": self.tail.to_dict() if self.tail is not None else None,
            "constants": self.constants,
            "entries": [[float(z.real), float(z.imag)] for z in A.ravel()],
        }


def dump_operator(op: OperatorFile) -> str:
    return dumps17(op.to_dict()) + "\n"


def load_operator(text: str) -> OperatorFile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExchangeError(f"not valid JSON: {exc}") from exc
    if not isinstance(d, dict) or "dim" not in d or "entries" not in d:
        raise ExchangeError("operator file needs 'dim' and 'entries'")
    if d.get("schema", SCHEMA) != SCHEMA:
        raise ExchangeError(f"unsupported schema {d.get('schema')!r}")
    n = d["dim"]
    try:
        e = np.asarray(d["entries"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ExchangeError(f"entries must be [re, im] pairs: {exc}") from exc
    if not isinstance(n, int) or n < 1 or e.shape != (n * n, 2):
        raise ExchangeError(f"expected {n}x{n} entries as [re, im] pairs, got shape {e.shape}")
    A = (e[:, 0] + 1j * e[:, 1]).reshape(n, n)
    tail = Tail.from_dict(d["tail"]) if d.get("tail") else None
    return OperatorFile(as_matrix(A), d.get("family"), d.get("params") or {}, tail, d.get("constants") or {})


def read_operator(path) -> OperatorFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ExchangeError(f"cannot read {path}: {exc}") from exc
    return load_operator(text)
