"""JSON envelope and CSV projection for command results.

Floats are written with ``repr``, the shortest string that round-trips to
the same double.  Non-finite floats become the strings ``"inf"``, ``"-inf"``
and ``"nan"`` (strict JSON has no literals for them) and exact rationals
become ``"numerator/denominator"``.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import enum
import hashlib
import io
import json
import math
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = "1"

__all__ = [
    "SCHEMA_VERSION",
    "jsonable",
    "make_envelope",
    "dumps",
    "loads",
    "payload_digest",
    "csv_text",
    "library_version",
]


def library_version() -> str:
    from . import __version__

    return __version__


def _float(x: float):
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def jsonable(obj):
    """Recursively convert results into plain JSON types."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, np.bool_):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, np.ndarray):
        return [jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return jsonable(dataclasses.asdict(obj))
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def make_envelope(command: str, spec: dict, results, warnings=()) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "spec": jsonable(spec),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "version": library_version(),
        "results": jsonable(results),
        "warnings": list(warnings),
    }


def dumps(envelope: dict, indent: int | None = 2) -> str:
    return json.dumps(envelope, indent=indent, allow_nan=False)


def loads(text: str) -> dict:
    return json.loads(text)


def payload_digest(envelope: dict) -> str:
    """SHA-256 of everything except the timestamp and version."""
    core = {k: v for k, v in envelope.items() if k not in ("timestamp", "version")}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def _cell(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return format(x, ".17g") if math.isfinite(x) else _float(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if x is None:
        return ""
    return x


def csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    """One line per row dict; missing keys are left blank."""
    if columns is None:
        columns = []
        for row in rows:
            columns += [c for c in row if c not in columns]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()
